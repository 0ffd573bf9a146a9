//! Bit-exact codec between binary masks and COCO-style compressed
//! run-length strings, the interchange format emitted by automatic mask
//! generators.
//!
//! Wire format: runs are laid out in column-major order (all of column 0
//! top to bottom, then column 1, ...), alternating background/foreground and
//! starting with background; a leading zero count is legal. Each count is a
//! little-endian sequence of 6-bit chunks stored as printable characters
//! (code points 48..=111): per character, `value = codepoint - 48`, the low
//! 5 bits are payload and bit 5 (0x20) is the continuation flag; bit 4 of
//! the final chunk sign-extends the value. From the fourth count on
//! (index > 2), counts are stored as deltas against the count two positions
//! earlier. Deltas can be negative, hence the sign handling.

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use crate::mask::BinaryMask;

/// A compressed run-length encoded binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RleMask {
    pub height: u32,
    pub width: u32,
    /// Compressed counts, characters with code points 48..=111.
    pub counts: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RleError {
    #[error("counts byte {byte:#04x} at offset {offset} outside code points 48..=111")]
    InvalidCodePoint { byte: u8, offset: usize },
    #[error("counts string ends inside a chunk sequence")]
    TruncatedSequence,
    #[error("count value at index {index} does not fit in 64 bits")]
    CountOverflow { index: usize },
    #[error("reconstructed count at index {index} is negative ({value})")]
    NegativeCount { index: usize, value: i64 },
    #[error("run counts sum to {sum} but the raster has {expected} pixels")]
    CountSumMismatch { sum: u64, expected: u64 },
    #[error("raster dimensions must be positive, got {height}x{width}")]
    EmptyDimensions { height: u32, width: u32 },
}

/// Decodes the compressed counts string into run lengths (background first).
///
/// Accepts non-canonical input: zero-length interior runs decode fine and
/// are simply runs that contribute no pixels.
pub fn decode_counts(counts: &str) -> Result<Vec<u64>, RleError> {
    let bytes = counts.as_bytes();
    let mut runs: Vec<i64> = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let mut value: i64 = 0;
        let mut chunk = 0u32;
        loop {
            if pos >= bytes.len() {
                return Err(RleError::TruncatedSequence);
            }
            let byte = bytes[pos];
            if !(48..=111).contains(&byte) {
                return Err(RleError::InvalidCodePoint { byte, offset: pos });
            }
            if 5 * chunk >= 60 {
                // a further 5-bit payload would spill past 64 bits
                return Err(RleError::CountOverflow { index: runs.len() });
            }
            let c = (byte - 48) as i64;
            value |= (c & 0x1f) << (5 * chunk);
            pos += 1;
            chunk += 1;
            if c & 0x20 != 0 {
                continue;
            }
            if c & 0x10 != 0 {
                // sign-extend from the final chunk
                value |= -1i64 << (5 * chunk).min(63);
            }
            break;
        }
        if runs.len() > 2 {
            value = value
                .checked_add(runs[runs.len() - 2])
                .ok_or(RleError::CountOverflow { index: runs.len() })?;
        }
        if value < 0 {
            return Err(RleError::NegativeCount {
                index: runs.len(),
                value,
            });
        }
        runs.push(value);
    }
    Ok(runs.into_iter().map(|v| v as u64).collect())
}

/// Decodes an RLE mask into a binary raster.
pub fn decode_rle(rle: &RleMask) -> Result<BinaryMask, RleError> {
    if rle.height == 0 || rle.width == 0 {
        return Err(RleError::EmptyDimensions {
            height: rle.height,
            width: rle.width,
        });
    }
    let runs = decode_counts(&rle.counts)?;
    let expected = rle.height as u64 * rle.width as u64;
    let sum = runs.iter().try_fold(0u64, |acc, &r| acc.checked_add(r));
    match sum {
        Some(s) if s == expected => {}
        Some(s) => return Err(RleError::CountSumMismatch { sum: s, expected }),
        None => return Err(RleError::CountOverflow { index: runs.len() }),
    }

    let mut mask = BinaryMask::new(rle.height, rle.width);
    let height = rle.height as u64;
    let mut cursor = 0u64;
    let mut foreground = false;
    for run in runs {
        if foreground {
            for idx in cursor..cursor + run {
                let x = (idx / height) as u32;
                let y = (idx % height) as u32;
                mask.set(x, y, true);
            }
        }
        cursor += run;
        foreground = !foreground;
    }
    Ok(mask)
}

/// Encodes a binary raster into canonical compressed RLE: no zero-length
/// interior runs and the minimal chunk sequence for every count.
pub fn encode_rle(mask: &BinaryMask) -> RleMask {
    let mut runs: Vec<u64> = Vec::new();
    let mut current = false;
    let mut count = 0u64;
    for x in 0..mask.width() {
        for y in 0..mask.height() {
            let v = mask.get(x, y);
            if v != current {
                runs.push(count);
                count = 0;
                current = v;
            }
            count += 1;
        }
    }
    runs.push(count);

    RleMask {
        height: mask.height(),
        width: mask.width(),
        counts: encode_counts(&runs),
    }
}

/// Compresses run lengths into the counts string.
pub fn encode_counts(runs: &[u64]) -> String {
    let mut out = String::new();
    for (i, &run) in runs.iter().enumerate() {
        let mut value = run as i64;
        if i > 2 {
            value -= runs[i - 2] as i64;
        }
        loop {
            let mut chunk = (value & 0x1f) as u8;
            value >>= 5;
            let more = if chunk & 0x10 != 0 {
                value != -1
            } else {
                value != 0
            };
            if more {
                chunk |= 0x20;
            }
            out.push((chunk + 48) as char);
            if !more {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    /// Independent naive encoder: per-pixel column-major run scan.
    fn naive_runs(mask: &BinaryMask) -> Vec<u64> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0u64;
        for x in 0..mask.width() {
            for y in 0..mask.height() {
                let v = mask.get(x, y);
                if v != current {
                    runs.push(count);
                    count = 0;
                    current = v;
                }
                count += 1;
            }
        }
        runs.push(count);
        runs
    }

    fn mask_from_colmajor_runs(height: u32, width: u32, runs: &[u64]) -> BinaryMask {
        let mut mask = BinaryMask::new(height, width);
        let mut cursor = 0u64;
        let mut fg = false;
        for &run in runs {
            if fg {
                for idx in cursor..cursor + run {
                    mask.set(
                        (idx / height as u64) as u32,
                        (idx % height as u64) as u32,
                        true,
                    );
                }
            }
            cursor += run;
            fg = !fg;
        }
        assert_eq!(cursor, height as u64 * width as u64);
        mask
    }

    #[test]
    fn decode_runs_6_4_6_sets_colmajor_pixels_6_through_9() {
        let rle = RleMask {
            height: 4,
            width: 4,
            counts: encode_counts(&[6, 4, 6]),
        };
        let mask = decode_rle(&rle).unwrap();
        let expected = mask_from_colmajor_runs(4, 4, &[6, 4, 6]);
        assert_eq!(mask, expected);
        assert_eq!(mask.area(), 4);
        // column-major indices 6..=9 are (x=1,y=2), (1,3), (2,0), (2,1)
        assert!(mask.get(1, 2) && mask.get(1, 3) && mask.get(2, 0) && mask.get(2, 1));
        // round-trip through the independent naive scan
        assert_eq!(naive_runs(&mask), vec![6, 4, 6]);
    }

    #[test]
    fn single_zero_run_decodes_all_background() {
        let rle = RleMask {
            height: 4,
            width: 4,
            counts: encode_counts(&[16]),
        };
        let mask = decode_rle(&rle).unwrap();
        assert_eq!(mask.area(), 0);
    }

    #[test]
    fn leading_zero_run_decodes_all_foreground() {
        let rle = RleMask {
            height: 4,
            width: 4,
            counts: encode_counts(&[0, 16]),
        };
        let mask = decode_rle(&rle).unwrap();
        assert_eq!(mask.area(), 16);
    }

    #[test]
    fn encode_all_background_is_single_run() {
        let mask = BinaryMask::new(4, 4);
        let rle = encode_rle(&mask);
        assert_eq!(decode_counts(&rle.counts).unwrap(), vec![16]);
    }

    #[test]
    fn encode_linear_alternation_gives_unit_runs() {
        // 1x4 raster with foreground at column-major positions 1 and 3
        let mut mask = BinaryMask::new(1, 4);
        mask.set(1, 0, true);
        mask.set(3, 0, true);
        assert_eq!(naive_runs(&mask), vec![1, 1, 1, 1]);
        let rle = encode_rle(&mask);
        assert_eq!(decode_counts(&rle.counts).unwrap(), vec![1, 1, 1, 1]);
        assert_eq!(decode_rle(&rle).unwrap(), mask);
    }

    #[test]
    fn encode_checkerboard_matches_naive_scan() {
        let mask = BinaryMask::from_fn(2, 2, |x, y| (x + y) % 2 == 1);
        let expected = naive_runs(&mask);
        assert_eq!(expected, vec![1, 2, 1]);
        let rle = encode_rle(&mask);
        assert_eq!(decode_counts(&rle.counts).unwrap(), expected);
    }

    #[test]
    fn zero_length_interior_runs_decode_and_reencode_canonically() {
        // runs [3, 0, 5, 1] contain a zero interior run; decodes to
        // 3 bg, 0 fg, 5 bg, 1 fg = canonical [8, 1]
        let counts = encode_counts(&[3, 0, 5, 1]);
        let rle = RleMask {
            height: 3,
            width: 3,
            counts,
        };
        let mask = decode_rle(&rle).unwrap();
        assert_eq!(mask.area(), 1);
        let reencoded = encode_rle(&mask);
        assert_eq!(decode_counts(&reencoded.counts).unwrap(), vec![8, 1]);
    }

    #[test]
    fn bad_code_point_is_rejected() {
        for counts in ["/", "zb", " 0", "0\u{70}"] {
            let rle = RleMask {
                height: 2,
                width: 2,
                counts: counts.to_string(),
            };
            assert!(matches!(
                decode_rle(&rle),
                Err(RleError::InvalidCodePoint { .. })
            ));
        }
    }

    #[test]
    fn truncated_chunk_sequence_is_rejected() {
        // A chunk with the continuation bit set and nothing after it.
        let rle = RleMask {
            height: 2,
            width: 2,
            counts: "P".to_string(), // 'P' = 80 -> value 32, continuation set
        };
        assert_eq!(decode_rle(&rle).unwrap_err(), RleError::TruncatedSequence);
    }

    #[test]
    fn negative_reconstructed_count_is_rejected() {
        // Single count encoding -1 (bit 4 set in final chunk, no continuation)
        let counts = encode_counts(&[]);
        assert_eq!(counts, "");
        let mut s = String::new();
        s.push((0x1fu8 + 48) as char); // chunk 0x1f: payload 31, sign bit -> -1
        let rle = RleMask {
            height: 2,
            width: 2,
            counts: s,
        };
        assert!(matches!(
            decode_rle(&rle),
            Err(RleError::NegativeCount { index: 0, .. })
        ));
    }

    #[test]
    fn count_sum_mismatch_is_rejected() {
        let rle = RleMask {
            height: 4,
            width: 4,
            counts: encode_counts(&[3, 5]), // sums to 8, raster has 16
        };
        assert_eq!(
            decode_rle(&rle).unwrap_err(),
            RleError::CountSumMismatch {
                sum: 8,
                expected: 16
            }
        );
    }

    #[test]
    fn zero_dimensions_are_rejected() {
        let rle = RleMask {
            height: 0,
            width: 4,
            counts: String::new(),
        };
        assert!(matches!(
            decode_rle(&rle),
            Err(RleError::EmptyDimensions { .. })
        ));
    }

    #[test]
    fn negative_delta_survives_round_trip() {
        // runs [10, 2, 50, 1]: index 3 encodes 1 - 2 = -1
        let runs = vec![10u64, 2, 50, 1, 1];
        let counts = encode_counts(&runs);
        assert_eq!(decode_counts(&counts).unwrap(), runs);
        let mask = mask_from_colmajor_runs(8, 8, &runs);
        let rle = encode_rle(&mask);
        let decoded = decode_rle(&rle).unwrap();
        assert_eq!(decoded, mask);
    }

    #[test]
    fn overlong_chunk_sequence_is_rejected() {
        // 14 continuation chunks would shift past 64 bits
        let mut s = String::new();
        for _ in 0..14 {
            s.push((0x21u8 + 48) as char); // payload 1, continuation set
        }
        s.push('0');
        let rle = RleMask {
            height: 4,
            width: 4,
            counts: s,
        };
        assert!(matches!(
            decode_rle(&rle),
            Err(RleError::CountOverflow { .. })
        ));
    }
}
