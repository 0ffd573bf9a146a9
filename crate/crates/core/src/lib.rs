//! Core library for SAM-enhanced pseudo-label refinement.
//!
//! Takes a class-aware pseudo-label raster (the coarse output of a weakly
//! supervised segmentation pipeline) plus a set of class-agnostic instance
//! masks (as produced by an automatic mask generator), and fuses them into a
//! boundary-accurate label raster: each mask is assigned to the class it
//! overlaps most, masks that are mostly covered by the labels or that cover
//! most of the labels are kept, and the kept masks are merged per class.
//!
//! The crate is `no_std` (with `alloc`) and fully deterministic; file formats
//! and the batch CLI live in the companion `sepl-cli` crate.
//!
//! Modules:
//! - [`mask`]: packed binary rasters, label maps, and the set algebra on them
//! - [`rle`]: bit-exact codec for COCO-style compressed run-length strings
//! - [`sepl`]: mask assignment, selection, merge, and flattening
//! - [`metrics`]: streaming confusion matrix and IoU/precision/recall reports
//! - [`synth`]: seeded synthetic scenes and a naive reference pipeline

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod mask;
pub mod metrics;
pub mod rle;
pub mod sepl;
pub mod synth;

pub use mask::{intersect_count, union_merge, BinaryMask, ClassSlice, LabelMap, MaskError};
pub use metrics::{ClassMetrics, ConfusionMatrix, MetricsError, MetricsReport};
pub use rle::{decode_rle, encode_rle, RleError, RleMask};
pub use sepl::{
    assign_masks, cam_to_label_map, enhance_image, flatten, select_masks, Assignment,
    FlattenPolicy, ScoreStack, SelectedMask, SelectionOutcome, SelectionRule, SeplConfig,
    SeplError,
};
pub use synth::{
    build_family, generate, random_instance, reference_sepl, FamilyConfig, FamilyKind, Scene,
    SceneSpec, SynthError,
};

/// Label value that marks pixels excluded from slicing and scoring.
pub const IGNORE_LABEL: u8 = 255;
