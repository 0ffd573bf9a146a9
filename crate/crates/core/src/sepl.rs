//! Mask fusion: assign each instance mask to the class it overlaps most,
//! keep the masks that are mostly covered by the class labels or that cover
//! most of the class labels, merge the kept masks per class, and flatten the
//! per-class results back into a single label raster.
//!
//! Two coverage fractions drive selection, computed against the seed labels
//! of the assigned class:
//! - mask coverage: intersection / mask area (how much of the mask the
//!   labels cover); high values mean the mask sits on labeled ground, which
//!   screens out background masks around over-activated labels;
//! - label coverage: intersection / label area (how much of the labels the
//!   mask covers); high values mean the mask contains the labeled region and
//!   likely completes a partially activated object.
//!
//! A mask is kept iff mask coverage > t1 OR label coverage > t2 (strict). If
//! a class keeps no mask, its original labels pass through unchanged.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use thiserror::Error;

use crate::mask::{union_merge, BinaryMask, ClassSlice, LabelMap, MaskError};
use crate::IGNORE_LABEL;

/// Default for `t1`, the mask-coverage selection threshold.
pub const DEFAULT_MASK_COVERAGE_THRESHOLD: f64 = 0.5;
/// Default for `t2`, the label-coverage selection threshold.
pub const DEFAULT_LABEL_COVERAGE_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SeplError {
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("class {class_id} has an empty slice; empty classes must be skipped upstream")]
    EmptySlice { class_id: u8 },
    #[error("threshold {value} is outside [0, 1]")]
    ThresholdOutOfRange { value: f64 },
    #[error("score stack length {actual} does not match classes*height*width = {expected}")]
    ShapeMismatch { expected: u64, actual: u64 },
    #[error("score at index {index} is outside [0, 1]")]
    ScoreOutOfRange { index: usize },
    #[error("{num_classes} classes do not fit the 8-bit label range")]
    TooManyClasses { num_classes: u16 },
}

/// How overlapping per-class enhanced regions are resolved into one raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlattenPolicy {
    /// Paint classes in decreasing area order so smaller regions land last
    /// and win; keeps small objects from being swallowed by enveloping
    /// regions. Equal areas paint in ascending class order (later wins).
    #[default]
    SmallerRegionLast,
    /// Paint in ascending class-id order; the higher class wins conflicts.
    HigherClassLast,
}

/// Thresholds and flattening policy for one enhancement run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeplConfig {
    mask_coverage_threshold: f64,
    label_coverage_threshold: f64,
    flatten_policy: FlattenPolicy,
}

impl Default for SeplConfig {
    fn default() -> Self {
        Self {
            mask_coverage_threshold: DEFAULT_MASK_COVERAGE_THRESHOLD,
            label_coverage_threshold: DEFAULT_LABEL_COVERAGE_THRESHOLD,
            flatten_policy: FlattenPolicy::default(),
        }
    }
}

impl SeplConfig {
    /// `t1` and `t2` must lie in `[0, 1]`.
    pub fn new(t1: f64, t2: f64, flatten_policy: FlattenPolicy) -> Result<Self, SeplError> {
        for value in [t1, t2] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SeplError::ThresholdOutOfRange { value });
            }
        }
        Ok(Self {
            mask_coverage_threshold: t1,
            label_coverage_threshold: t2,
            flatten_policy,
        })
    }

    pub fn with_flatten_policy(mut self, policy: FlattenPolicy) -> Self {
        self.flatten_policy = policy;
        self
    }

    /// `t1`: a mask is kept when the labels cover more than this fraction of it.
    pub fn mask_coverage_threshold(&self) -> f64 {
        self.mask_coverage_threshold
    }

    /// `t2`: a mask is kept when it covers more than this fraction of the labels.
    pub fn label_coverage_threshold(&self) -> f64 {
        self.label_coverage_threshold
    }

    pub fn flatten_policy(&self) -> FlattenPolicy {
        self.flatten_policy
    }
}

/// A mask reference with its cached intersection against the class it was
/// assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignedMask {
    /// Index into the mask list given to [`assign_masks`].
    pub mask: usize,
    pub intersection: u64,
}

/// Result of the assignment stage: each input mask lands in exactly one
/// per-class list, or in `discarded` when it overlaps no class at all.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    pub per_class: BTreeMap<u8, Vec<AssignedMask>>,
    pub discarded: Vec<usize>,
}

impl Assignment {
    pub fn assigned_count(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }
}

/// Why a mask was kept for a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Mask coverage exceeded `t1` (only).
    MaskCoverage,
    /// Label coverage exceeded `t2` (only).
    LabelCoverage,
    /// Both thresholds were exceeded.
    Both,
    /// Nothing was selected; the original labels pass through unchanged.
    FallbackOriginal,
}

/// One kept mask with the coverage fractions it was judged on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectedMask {
    /// Candidate index; `None` for the fallback entry, which carries the
    /// original class slice instead of an input mask.
    pub mask: Option<usize>,
    /// Intersection / mask area.
    pub mask_coverage: f64,
    /// Intersection / label area.
    pub label_coverage: f64,
    pub rule: SelectionRule,
}

/// Per-class result: the kept masks and their merged region.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEnhancement {
    pub selections: Vec<SelectedMask>,
    pub enhanced: BinaryMask,
}

impl ClassEnhancement {
    pub fn is_fallback(&self) -> bool {
        self.selections
            .first()
            .is_some_and(|s| s.rule == SelectionRule::FallbackOriginal)
    }
}

/// Full result of enhancing one image.
///
/// Mask indices in `per_class` refer to *canonical* positions;
/// `canonical_order[slot]` maps a canonical slot back to the caller's input
/// index. Because the canonical order depends only on mask content, every
/// other field is independent of the input ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub canonical_order: Vec<usize>,
    pub per_class: BTreeMap<u8, ClassEnhancement>,
    pub discarded: Vec<usize>,
    pub flat: LabelMap,
}

/// Canonical processing order: area descending, then first foreground pixel
/// in column-major order, then input position. Makes results independent of
/// the order masks arrive in.
pub fn canonical_mask_order(masks: &[BinaryMask]) -> Vec<usize> {
    let mut keys: Vec<(u64, u64, usize)> = masks
        .iter()
        .enumerate()
        .map(|(i, m)| (m.area(), m.first_set_column_major().unwrap_or(u64::MAX), i))
        .collect();
    keys.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    keys.into_iter().map(|(_, _, i)| i).collect()
}

fn slices_of_present_classes(pseudo: &LabelMap) -> Vec<ClassSlice> {
    pseudo
        .present_classes()
        .into_iter()
        .map(|k| pseudo.slice_of(k).expect("present class is sliceable"))
        .collect()
}

fn assign_refs(pseudo: &LabelMap, masks: &[&BinaryMask]) -> Result<Assignment, SeplError> {
    for mask in masks {
        if mask.height() != pseudo.height() || mask.width() != pseudo.width() {
            return Err(MaskError::DimensionMismatch {
                left_height: mask.height(),
                left_width: mask.width(),
                right_height: pseudo.height(),
                right_width: pseudo.width(),
            }
            .into());
        }
    }
    let slices = slices_of_present_classes(pseudo);
    let mut assignment = Assignment::default();
    for (idx, mask) in masks.iter().enumerate() {
        let mut best: Option<(u8, u64)> = None;
        for slice in &slices {
            let inter = mask.intersection_count(slice.region());
            // strict > keeps the lowest class id on ties
            if inter > best.map_or(0, |(_, i)| i) {
                best = Some((slice.class_id(), inter));
            }
        }
        match best {
            Some((class_id, intersection)) => assignment
                .per_class
                .entry(class_id)
                .or_default()
                .push(AssignedMask {
                    mask: idx,
                    intersection,
                }),
            None => assignment.discarded.push(idx),
        }
    }
    Ok(assignment)
}

/// Assigns every mask to the class whose labels it intersects most (ties go
/// to the lowest class id); masks that overlap no class are discarded.
pub fn assign_masks(pseudo: &LabelMap, masks: &[BinaryMask]) -> Result<Assignment, SeplError> {
    let refs: Vec<&BinaryMask> = masks.iter().collect();
    assign_refs(pseudo, &refs)
}

fn select_refs(
    slice: &ClassSlice,
    candidates: &[(usize, &BinaryMask)],
    cfg: &SeplConfig,
) -> Result<Vec<SelectedMask>, SeplError> {
    if slice.area() == 0 {
        return Err(SeplError::EmptySlice {
            class_id: slice.class_id(),
        });
    }
    let label_area = slice.area() as f64;
    let mut kept = Vec::new();
    for &(idx, mask) in candidates {
        if mask.height() != slice.region().height() || mask.width() != slice.region().width() {
            return Err(MaskError::DimensionMismatch {
                left_height: mask.height(),
                left_width: mask.width(),
                right_height: slice.region().height(),
                right_width: slice.region().width(),
            }
            .into());
        }
        let intersection = mask.intersection_count(slice.region()) as f64;
        let mask_coverage = intersection / mask.area() as f64;
        let label_coverage = intersection / label_area;
        let by_mask = mask_coverage > cfg.mask_coverage_threshold;
        let by_label = label_coverage > cfg.label_coverage_threshold;
        let rule = match (by_mask, by_label) {
            (true, true) => SelectionRule::Both,
            (true, false) => SelectionRule::MaskCoverage,
            (false, true) => SelectionRule::LabelCoverage,
            (false, false) => continue,
        };
        kept.push(SelectedMask {
            mask: Some(idx),
            mask_coverage,
            label_coverage,
            rule,
        });
    }
    if kept.is_empty() {
        kept.push(SelectedMask {
            mask: None,
            mask_coverage: 1.0,
            label_coverage: 1.0,
            rule: SelectionRule::FallbackOriginal,
        });
    }
    Ok(kept)
}

/// Judges each candidate against a nonempty class slice and returns the kept
/// ones. When nothing passes, returns the single fallback entry standing for
/// the unchanged original slice.
pub fn select_masks(
    slice: &ClassSlice,
    candidates: &[BinaryMask],
    cfg: &SeplConfig,
) -> Result<Vec<SelectedMask>, SeplError> {
    let indexed: Vec<(usize, &BinaryMask)> = candidates.iter().enumerate().collect();
    select_refs(slice, &indexed, cfg)
}

/// Resolves per-class regions into a single label raster. Uncovered pixels
/// become background.
pub fn flatten(
    height: u32,
    width: u32,
    enhanced: &BTreeMap<u8, BinaryMask>,
    policy: FlattenPolicy,
) -> Result<LabelMap, SeplError> {
    let mut order: Vec<(u8, &BinaryMask)> = Vec::with_capacity(enhanced.len());
    for (&class_id, region) in enhanced {
        if class_id == 0 || class_id == IGNORE_LABEL {
            return Err(MaskError::ClassOutOfRange { class_id }.into());
        }
        if region.height() != height || region.width() != width {
            return Err(MaskError::DimensionMismatch {
                left_height: region.height(),
                left_width: region.width(),
                right_height: height,
                right_width: width,
            }
            .into());
        }
        order.push((class_id, region));
    }
    match policy {
        // BTreeMap iteration is already ascending by class id, so sorting by
        // descending area alone keeps the ascending-class order within ties.
        FlattenPolicy::SmallerRegionLast => {
            order.sort_by_key(|(_, r)| core::cmp::Reverse(r.area()))
        }
        FlattenPolicy::HigherClassLast => {}
    }

    let mut map = LabelMap::new(height, width);
    for (class_id, region) in order {
        for y in 0..height {
            for x in 0..width {
                if region.get(x, y) {
                    map.set(x, y, class_id);
                }
            }
        }
    }
    Ok(map)
}

/// Runs the full pipeline for one image: canonicalize mask order, assign,
/// select per nonempty class, merge, and flatten.
pub fn enhance_image(
    pseudo: &LabelMap,
    masks: &[BinaryMask],
    cfg: &SeplConfig,
) -> Result<SelectionOutcome, SeplError> {
    let canonical_order = canonical_mask_order(masks);
    let canon: Vec<&BinaryMask> = canonical_order.iter().map(|&i| &masks[i]).collect();
    let assignment = assign_refs(pseudo, &canon)?;

    let mut per_class = BTreeMap::new();
    let mut regions = BTreeMap::new();
    for slice in slices_of_present_classes(pseudo) {
        let class_id = slice.class_id();
        let candidates: Vec<(usize, &BinaryMask)> = assignment
            .per_class
            .get(&class_id)
            .map(|assigned| assigned.iter().map(|a| (a.mask, canon[a.mask])).collect())
            .unwrap_or_default();
        let selections = select_refs(&slice, &candidates, cfg)?;
        let enhanced = if selections[0].rule == SelectionRule::FallbackOriginal {
            slice.region().clone()
        } else {
            union_merge(
                selections
                    .iter()
                    .map(|s| canon[s.mask.expect("non-fallback selection has a mask")]),
            )?
        };
        regions.insert(class_id, enhanced.clone());
        per_class.insert(
            class_id,
            ClassEnhancement {
                selections,
                enhanced,
            },
        );
    }

    let flat = flatten(
        pseudo.height(),
        pseudo.width(),
        &regions,
        cfg.flatten_policy(),
    )?;
    Ok(SelectionOutcome {
        canonical_order,
        per_class,
        discarded: assignment.discarded,
        flat,
    })
}

/// A stack of per-class activation planes with values in `[0, 1]`.
///
/// Plane `k` (0-based) holds the activations for foreground class `k + 1`;
/// planes are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStack {
    num_classes: u8,
    height: u32,
    width: u32,
    values: Vec<f32>,
}

impl ScoreStack {
    pub fn new(
        num_classes: u16,
        height: u32,
        width: u32,
        values: Vec<f32>,
    ) -> Result<Self, SeplError> {
        if num_classes > 254 {
            return Err(SeplError::TooManyClasses { num_classes });
        }
        let expected = num_classes as u64 * height as u64 * width as u64;
        if values.len() as u64 != expected {
            return Err(SeplError::ShapeMismatch {
                expected,
                actual: values.len() as u64,
            });
        }
        if let Some(index) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(SeplError::ScoreOutOfRange { index });
        }
        Ok(Self {
            num_classes: num_classes as u8,
            height,
            width,
            values,
        })
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    fn score(&self, plane: usize, x: u32, y: u32) -> f32 {
        let hw = self.height as usize * self.width as usize;
        self.values[plane * hw + y as usize * self.width as usize + x as usize]
    }
}

/// Thresholds an activation stack into a label raster: each pixel takes the
/// arg-max class when the max activation reaches `bg_threshold`, else
/// background. Arg-max ties go to the lowest class id.
pub fn cam_to_label_map(scores: &ScoreStack, bg_threshold: f64) -> Result<LabelMap, SeplError> {
    if !(0.0..=1.0).contains(&bg_threshold) {
        return Err(SeplError::ThresholdOutOfRange {
            value: bg_threshold,
        });
    }
    let mut map = LabelMap::new(scores.height(), scores.width());
    for y in 0..scores.height() {
        for x in 0..scores.width() {
            let mut best_class = 0u8;
            let mut best_score = f32::NEG_INFINITY;
            for plane in 0..scores.num_classes() as usize {
                let s = scores.score(plane, x, y);
                if s > best_score {
                    best_score = s;
                    best_class = plane as u8 + 1;
                }
            }
            if best_class != 0 && best_score as f64 >= bg_threshold {
                map.set(x, y, best_class);
            }
        }
    }
    Ok(map)
}
