//! Raster primitives: packed binary masks, label maps, class slices, and the
//! intersection/union operations everything else is built on.
//!
//! Contracts are stated at pixel level; internally [`BinaryMask`] packs pixels
//! into `u64` words (row-major) so intersections reduce to word-wise
//! AND + popcount.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::IGNORE_LABEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("dimension mismatch: {left_height}x{left_width} vs {right_height}x{right_width}")]
    DimensionMismatch {
        left_height: u32,
        left_width: u32,
        right_height: u32,
        right_width: u32,
    },
    #[error("empty mask list")]
    EmptyMaskList,
    #[error("class id {class_id} is not a foreground class")]
    ClassOutOfRange { class_id: u8 },
}

fn dims_check(lh: u32, lw: u32, rh: u32, rw: u32) -> Result<(), MaskError> {
    if lh != rh || lw != rw {
        return Err(MaskError::DimensionMismatch {
            left_height: lh,
            left_width: lw,
            right_height: rh,
            right_width: rw,
        });
    }
    Ok(())
}

/// A binary raster with a cached foreground pixel count.
///
/// Pixels are addressed as `(x, y)` with `x` in `0..width` (column) and `y`
/// in `0..height` (row). The trailing bits of the last word are always zero,
/// so equality and popcounts can work on whole words.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: u32,
    width: u32,
    words: Vec<u64>,
    area: u64,
}

impl core::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("area", &self.area)
            .finish()
    }
}

impl BinaryMask {
    /// All-background mask. Panics if either dimension is zero.
    pub fn new(height: u32, width: u32) -> Self {
        assert!(height > 0 && width > 0, "mask dimensions must be positive");
        let bits = height as u64 * width as u64;
        let words = bits.div_ceil(64) as usize;
        Self {
            height,
            width,
            words: vec![0; words],
            area: 0,
        }
    }

    /// Builds a mask by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(height: u32, width: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut mask = Self::new(height, width);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.set(x, y, true);
                }
            }
        }
        mask
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Number of foreground pixels; always equal to the true popcount.
    pub fn area(&self) -> u64 {
        self.area
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    #[inline]
    fn bit_index(&self, x: u32, y: u32) -> (usize, u32) {
        debug_assert!(x < self.width && y < self.height);
        let idx = y as u64 * self.width as u64 + x as u64;
        ((idx / 64) as usize, (idx % 64) as u32)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        let (word, bit) = self.bit_index(x, y);
        (self.words[word] >> bit) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        let (word, bit) = self.bit_index(x, y);
        let mask = 1u64 << bit;
        let was = self.words[word] & mask != 0;
        if value && !was {
            self.words[word] |= mask;
            self.area += 1;
        } else if !value && was {
            self.words[word] &= !mask;
            self.area -= 1;
        }
    }

    /// Pixels set in both masks, by word-parallel AND + popcount.
    ///
    /// Panics on dimension mismatch; use [`intersect_count`] for a checked
    /// variant.
    pub fn intersection_count(&self, other: &Self) -> u64 {
        assert!(self.same_dims(other), "dimension mismatch");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum()
    }

    /// In-place pixelwise OR. Panics on dimension mismatch.
    pub fn or_assign(&mut self, other: &Self) {
        assert!(self.same_dims(other), "dimension mismatch");
        let mut area = 0u64;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
            area += a.count_ones() as u64;
        }
        self.area = area;
    }

    /// True if every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        assert!(self.same_dims(other), "dimension mismatch");
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    /// Column-major linear index (`x * height + y`) of the first foreground
    /// pixel, or `None` for an empty mask. Used as a positional tie-break
    /// when ordering masks of equal area.
    pub fn first_set_column_major(&self) -> Option<u64> {
        if self.area == 0 {
            return None;
        }
        for x in 0..self.width {
            for y in 0..self.height {
                if self.get(x, y) {
                    return Some(x as u64 * self.height as u64 + y as u64);
                }
            }
        }
        None
    }
}

/// Pixelwise OR of a nonempty sequence of equally sized masks.
pub fn union_merge<'a, I>(masks: I) -> Result<BinaryMask, MaskError>
where
    I: IntoIterator<Item = &'a BinaryMask>,
{
    let mut iter = masks.into_iter();
    let first = iter.next().ok_or(MaskError::EmptyMaskList)?;
    let mut merged = first.clone();
    for mask in iter {
        dims_check(merged.height, merged.width, mask.height, mask.width)?;
        merged.or_assign(mask);
    }
    Ok(merged)
}

/// Pixels set in both the mask and the class slice.
pub fn intersect_count(mask: &BinaryMask, slice: &ClassSlice) -> Result<u64, MaskError> {
    let region = slice.region();
    dims_check(mask.height, mask.width, region.height, region.width)?;
    Ok(mask.intersection_count(region))
}

/// A per-pixel class raster: 0 is background, [`IGNORE_LABEL`] (255) is
/// ignore/void, anything else is a foreground class id.
#[derive(Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: u32,
    width: u32,
    data: Vec<u8>,
}

impl core::fmt::Debug for LabelMap {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("LabelMap")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl LabelMap {
    /// All-background map. Panics if either dimension is zero.
    pub fn new(height: u32, width: u32) -> Self {
        assert!(height > 0 && width > 0, "map dimensions must be positive");
        Self {
            height,
            width,
            data: vec![0; height as usize * width as usize],
        }
    }

    /// Wraps an existing row-major value buffer. Panics if the buffer length
    /// does not equal `height * width` or a dimension is zero.
    pub fn from_raw(height: u32, width: u32, data: Vec<u8>) -> Self {
        assert!(height > 0 && width > 0, "map dimensions must be positive");
        assert_eq!(
            data.len() as u64,
            height as u64 * width as u64,
            "buffer length must equal height * width"
        );
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Row-major pixel values.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count_of(&self, value: u8) -> u64 {
        self.data.iter().filter(|&&v| v == value).count() as u64
    }

    /// Foreground class ids that appear in the map, ascending. Background and
    /// ignore values are never included.
    pub fn present_classes(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &v in &self.data {
            seen[v as usize] = true;
        }
        (1..IGNORE_LABEL).filter(|&k| seen[k as usize]).collect()
    }

    /// Binary view of the pixels equal to `class_id`. Ignore pixels are never
    /// part of any slice; an empty slice is fine.
    pub fn slice_of(&self, class_id: u8) -> Result<ClassSlice, MaskError> {
        if class_id == 0 || class_id == IGNORE_LABEL {
            return Err(MaskError::ClassOutOfRange { class_id });
        }
        let mut region = BinaryMask::new(self.height, self.width);
        for y in 0..self.height {
            let row = y as usize * self.width as usize;
            for x in 0..self.width {
                if self.data[row + x as usize] == class_id {
                    region.set(x, y, true);
                }
            }
        }
        Ok(ClassSlice { class_id, region })
    }
}

/// The pixels of one foreground class, as a binary raster snapshot of its
/// parent [`LabelMap`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassSlice {
    class_id: u8,
    region: BinaryMask,
}

impl ClassSlice {
    /// Builds a slice directly from a raster; `class_id` must be a foreground
    /// class.
    pub fn from_region(class_id: u8, region: BinaryMask) -> Result<Self, MaskError> {
        if class_id == 0 || class_id == IGNORE_LABEL {
            return Err(MaskError::ClassOutOfRange { class_id });
        }
        Ok(Self { class_id, region })
    }

    pub fn class_id(&self) -> u8 {
        self.class_id
    }

    pub fn region(&self) -> &BinaryMask {
        &self.region
    }

    pub fn area(&self) -> u64 {
        self.region.area()
    }

    pub fn into_region(self) -> BinaryMask {
        self.region
    }
}
