//! Pixel-level segmentation quality: a streaming confusion matrix over
//! `(K+1) x (K+1)` classes (background is class 0) and the per-class
//! IoU/precision/recall report derived from it.
//!
//! Ground-truth ignore pixels (255) are excluded from scoring entirely; the
//! prediction value at an ignored pixel never influences any metric.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::mask::LabelMap;
use crate::IGNORE_LABEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {left_height}x{left_width} vs {right_height}x{right_width}")]
    DimensionMismatch {
        left_height: u32,
        left_width: u32,
        right_height: u32,
        right_width: u32,
    },
    #[error("{which} value {value} exceeds class count {num_classes}")]
    ClassOutOfRange {
        which: &'static str,
        value: u8,
        num_classes: u8,
    },
    #[error("class count mismatch: {left} vs {right}")]
    ClassCountMismatch { left: u8, right: u8 },
}

/// Pixel-count matrix: `cell(g, p)` counts pixels with ground truth `g`
/// predicted as `p`, for `g, p` in `0..=num_classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: u8,
    cells: Vec<u64>,
}

impl ConfusionMatrix {
    /// `num_classes` is the number of foreground classes K; the matrix is
    /// `(K+1) x (K+1)` including background. Panics if K is 255 (reserved
    /// for ignore).
    pub fn new(num_classes: u8) -> Self {
        assert!(
            num_classes < IGNORE_LABEL,
            "class count must leave 255 for ignore"
        );
        let side = num_classes as usize + 1;
        Self {
            num_classes,
            cells: vec![0; side * side],
        }
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn cell(&self, gt: u8, pred: u8) -> u64 {
        let side = self.num_classes as usize + 1;
        self.cells[gt as usize * side + pred as usize]
    }

    /// Total scored pixels.
    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    /// Adds counts for every pixel whose ground truth is not ignore.
    ///
    /// Validates both maps before touching any cell, so a failed call leaves
    /// the matrix unchanged.
    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<(), MetricsError> {
        if !pred.same_dims(gt) {
            return Err(MetricsError::DimensionMismatch {
                left_height: pred.height(),
                left_width: pred.width(),
                right_height: gt.height(),
                right_width: gt.width(),
            });
        }
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            if g == IGNORE_LABEL {
                continue;
            }
            if g > self.num_classes {
                return Err(MetricsError::ClassOutOfRange {
                    which: "ground-truth",
                    value: g,
                    num_classes: self.num_classes,
                });
            }
            if p > self.num_classes {
                // includes a predicted ignore value on a scored pixel
                return Err(MetricsError::ClassOutOfRange {
                    which: "prediction",
                    value: p,
                    num_classes: self.num_classes,
                });
            }
        }
        let side = self.num_classes as usize + 1;
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            if g != IGNORE_LABEL {
                self.cells[g as usize * side + p as usize] += 1;
            }
        }
        Ok(())
    }

    /// Cellwise sum; accumulating a dataset equals merging per-image
    /// matrices in any association order.
    pub fn merge(&self, other: &Self) -> Result<ConfusionMatrix, MetricsError> {
        if self.num_classes != other.num_classes {
            return Err(MetricsError::ClassCountMismatch {
                left: self.num_classes,
                right: other.num_classes,
            });
        }
        let mut merged = self.clone();
        for (a, b) in merged.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        Ok(merged)
    }

    /// Derives per-class and macro metrics.
    ///
    /// A metric is `None` when its denominator is zero; classes absent from
    /// both ground truth and prediction contribute to no macro mean.
    pub fn report(&self) -> MetricsReport {
        let side = self.num_classes as usize + 1;
        let mut per_class = Vec::with_capacity(side);
        for c in 0..side {
            let tp = self.cells[c * side + c];
            let fp: u64 = (0..side)
                .filter(|&g| g != c)
                .map(|g| self.cells[g * side + c])
                .sum();
            let fneg: u64 = (0..side)
                .filter(|&p| p != c)
                .map(|p| self.cells[c * side + p])
                .sum();
            let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
            per_class.push(ClassMetrics {
                class_id: c as u8,
                true_positives: tp,
                false_positives: fp,
                false_negatives: fneg,
                iou: ratio(tp, tp + fp + fneg),
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fneg),
            });
        }

        let mean = |values: &mut dyn Iterator<Item = Option<f64>>| {
            let mut sum = 0.0;
            let mut count = 0u32;
            for v in values.flatten() {
                sum += v;
                count += 1;
            }
            (count > 0).then(|| sum / count as f64)
        };
        let miou = mean(&mut per_class.iter().map(|c| c.iou));
        let mean_precision_all = mean(&mut per_class.iter().map(|c| c.precision));
        let mean_recall_all = mean(&mut per_class.iter().map(|c| c.recall));
        let mean_precision_foreground = mean(&mut per_class.iter().skip(1).map(|c| c.precision));
        let mean_recall_foreground = mean(&mut per_class.iter().skip(1).map(|c| c.recall));

        MetricsReport {
            num_classes: self.num_classes,
            scored_pixels: self.total(),
            per_class,
            miou,
            mean_precision_all,
            mean_recall_all,
            mean_precision_foreground,
            mean_recall_foreground,
        }
    }
}

/// Metrics for one class; `None` marks an undefined value (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub class_id: u8,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub iou: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl ClassMetrics {
    /// Whether the class appears in ground truth or prediction at all; only
    /// such classes enter the macro means.
    pub fn defined(&self) -> bool {
        self.true_positives + self.false_positives + self.false_negatives > 0
    }
}

/// Dataset-level report. `miou` averages IoU over all classes including
/// background (the usual convention for VOC-style labels); precision and
/// recall means come in both all-class and foreground-only flavors.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub num_classes: u8,
    pub scored_pixels: u64,
    pub per_class: Vec<ClassMetrics>,
    pub miou: Option<f64>,
    pub mean_precision_all: Option<f64>,
    pub mean_recall_all: Option<f64>,
    pub mean_precision_foreground: Option<f64>,
    pub mean_recall_foreground: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_from(height: u32, width: u32, values: &[u8]) -> LabelMap {
        LabelMap::from_raw(height, width, values.to_vec())
    }

    #[test]
    fn identical_maps_only_grow_the_diagonal() {
        let map = map_from(2, 3, &[0, 1, 1, 2, 0, 2]);
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&map, &map).unwrap();
        assert_eq!(cm.cell(0, 0), 2);
        assert_eq!(cm.cell(1, 1), 2);
        assert_eq!(cm.cell(2, 2), 2);
        assert_eq!(cm.total(), 6);
        for g in 0..=2u8 {
            for p in 0..=2u8 {
                if g != p {
                    assert_eq!(cm.cell(g, p), 0);
                }
            }
        }
    }

    #[test]
    fn all_ignore_ground_truth_changes_nothing() {
        let gt = map_from(2, 2, &[255, 255, 255, 255]);
        let pred = map_from(2, 2, &[0, 1, 2, 0]);
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&pred, &gt).unwrap();
        assert_eq!(cm.total(), 0);
    }

    #[test]
    fn known_mixture_matches_hand_tally() {
        // 4x4: gt has 8 px of class 1 (rows 0-1), rest background;
        // pred marks class 1 on 6 of those, misses 2, and false-fires on 4
        // background pixels
        let gt = map_from(4, 4, &[1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0]);
        let pred = map_from(4, 4, &[1, 1, 1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0]);
        let mut cm = ConfusionMatrix::new(1);
        cm.accumulate(&pred, &gt).unwrap();
        assert_eq!(cm.cell(1, 1), 6);
        assert_eq!(cm.cell(1, 0), 2);
        assert_eq!(cm.cell(0, 1), 4);
        assert_eq!(cm.cell(0, 0), 4);

        let report = cm.report();
        let class1 = &report.per_class[1];
        assert_eq!(class1.iou, Some(0.5)); // 6 / (6+4+2)
        assert_eq!(class1.precision, Some(0.6)); // 6 / 10
        assert_eq!(class1.recall, Some(0.75)); // 6 / 8
    }

    #[test]
    fn accumulate_rejects_out_of_range_values_without_mutating() {
        let gt = map_from(1, 2, &[0, 3]);
        let pred = map_from(1, 2, &[0, 0]);
        let mut cm = ConfusionMatrix::new(2);
        assert!(matches!(
            cm.accumulate(&pred, &gt),
            Err(MetricsError::ClassOutOfRange {
                which: "ground-truth",
                value: 3,
                ..
            })
        ));
        assert_eq!(cm.total(), 0);

        // predicted ignore on a scored pixel is also out of range
        let gt = map_from(1, 2, &[0, 1]);
        let pred = map_from(1, 2, &[0, 255]);
        assert!(matches!(
            cm.accumulate(&pred, &gt),
            Err(MetricsError::ClassOutOfRange {
                which: "prediction",
                value: 255,
                ..
            })
        ));
        assert_eq!(cm.total(), 0);
    }

    #[test]
    fn predicted_ignore_on_ignored_pixel_is_fine() {
        let gt = map_from(1, 2, &[255, 1]);
        let pred = map_from(1, 2, &[255, 1]);
        let mut cm = ConfusionMatrix::new(1);
        cm.accumulate(&pred, &gt).unwrap();
        assert_eq!(cm.total(), 1);
    }

    #[test]
    fn merge_with_zero_matrix_is_identity() {
        let map = map_from(2, 2, &[0, 1, 1, 0]);
        let mut cm = ConfusionMatrix::new(1);
        cm.accumulate(&map, &map).unwrap();
        let merged = cm.merge(&ConfusionMatrix::new(1)).unwrap();
        assert_eq!(merged, cm);
    }

    #[test]
    fn merge_is_commutative() {
        let a_map = map_from(2, 2, &[0, 1, 2, 0]);
        let b_map = map_from(2, 2, &[2, 2, 1, 0]);
        let mut a = ConfusionMatrix::new(2);
        a.accumulate(&a_map, &a_map).unwrap();
        let mut b = ConfusionMatrix::new(2);
        b.accumulate(&a_map, &b_map).unwrap();
        assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
    }

    #[test]
    fn merge_rejects_class_count_mismatch() {
        let a = ConfusionMatrix::new(2);
        let b = ConfusionMatrix::new(3);
        assert_eq!(
            a.merge(&b).unwrap_err(),
            MetricsError::ClassCountMismatch { left: 2, right: 3 }
        );
    }

    #[test]
    fn perfect_prediction_scores_ones_everywhere() {
        let map = map_from(3, 3, &[0, 1, 2, 2, 1, 0, 0, 1, 2]);
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&map, &map).unwrap();
        let report = cm.report();
        assert_eq!(report.miou, Some(1.0));
        assert_eq!(report.mean_precision_all, Some(1.0));
        assert_eq!(report.mean_recall_all, Some(1.0));
        assert_eq!(report.mean_precision_foreground, Some(1.0));
        assert_eq!(report.mean_recall_foreground, Some(1.0));
        for c in &report.per_class {
            assert_eq!(c.iou, Some(1.0));
        }
    }

    #[test]
    fn disjoint_foreground_has_zero_iou() {
        let gt = map_from(1, 4, &[1, 1, 0, 0]);
        let pred = map_from(1, 4, &[0, 0, 1, 1]);
        let mut cm = ConfusionMatrix::new(1);
        cm.accumulate(&pred, &gt).unwrap();
        let report = cm.report();
        assert_eq!(report.per_class[1].iou, Some(0.0));
    }

    #[test]
    fn absent_classes_are_undefined_and_excluded_from_means() {
        // class 2 never appears on either side
        let gt = map_from(1, 4, &[0, 1, 1, 0]);
        let pred = map_from(1, 4, &[0, 1, 0, 0]);
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&pred, &gt).unwrap();
        let report = cm.report();
        let class2 = &report.per_class[2];
        assert!(!class2.defined());
        assert_eq!(class2.iou, None);
        assert_eq!(class2.precision, None);
        assert_eq!(class2.recall, None);
        // miou = mean(iou_0, iou_1) = mean(2/3, 1/2)
        let expected = (2.0 / 3.0 + 0.5) / 2.0;
        assert!((report.miou.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn class_in_gt_but_never_predicted_has_undefined_precision() {
        let gt = map_from(1, 3, &[1, 1, 0]);
        let pred = map_from(1, 3, &[0, 0, 0]);
        let mut cm = ConfusionMatrix::new(1);
        cm.accumulate(&pred, &gt).unwrap();
        let report = cm.report();
        let class1 = &report.per_class[1];
        assert_eq!(class1.precision, None);
        assert_eq!(class1.recall, Some(0.0));
        assert_eq!(class1.iou, Some(0.0));
        // foreground precision mean has no defined entries
        assert_eq!(report.mean_precision_foreground, None);
    }

    #[test]
    fn iou_never_exceeds_precision_or_recall() {
        let gt = map_from(2, 4, &[1, 1, 0, 2, 2, 0, 1, 2]);
        let pred = map_from(2, 4, &[1, 0, 1, 2, 0, 2, 1, 1]);
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&pred, &gt).unwrap();
        for c in cm.report().per_class {
            if let (Some(iou), Some(p), Some(r)) = (c.iou, c.precision, c.recall) {
                assert!(iou <= p + 1e-12 && iou <= r + 1e-12);
            }
        }
    }

    #[test]
    fn empty_matrix_reports_all_undefined() {
        let report = ConfusionMatrix::new(3).report();
        assert_eq!(report.miou, None);
        assert_eq!(report.scored_pixels, 0);
        assert!(report.per_class.iter().all(|c| !c.defined()));
    }
}
