//! Seeded synthetic scenes and the naive reference pipeline.
//!
//! A scene is a ground-truth label map, a degraded pseudo-label map (labels
//! that under-cover their object, spill past it, or both), and a bag of
//! instance masks: the exact object rasters, random part subdivisions,
//! background distractor rectangles, and optionally an oversized envelope.
//! Everything is a pure function of the spec and its seed, so corpora are
//! reproducible byte for byte.
//!
//! [`reference_sepl`] is a straight-line per-pixel transcription of the
//! enhancement procedure, kept free of the packed-word raster ops so it can
//! serve as an independent oracle for [`crate::sepl::enhance_image`].

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mask::{BinaryMask, LabelMap};
use crate::sepl::{
    ClassEnhancement, FlattenPolicy, SelectedMask, SelectionOutcome, SelectionRule, SeplConfig,
    SeplError, DEFAULT_LABEL_COVERAGE_THRESHOLD, DEFAULT_MASK_COVERAGE_THRESHOLD,
};
use crate::IGNORE_LABEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("infeasible scene spec: {reason}")]
    InfeasibleSpec { reason: &'static str },
}

fn infeasible(reason: &'static str) -> SynthError {
    SynthError::InfeasibleSpec { reason }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
}

/// Axis-aligned placement box, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Bounds {
    fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectSpec {
    pub class_id: u8,
    pub shape: ShapeKind,
    pub bounds: Bounds,
}

/// How the pseudo-labels deviate from the ground truth: `erode_fraction`
/// shrinks each object's labels to a sub-region (partial activation),
/// `spill_fraction` extends them past the object (false activation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degradation {
    pub erode_fraction: f64,
    pub spill_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskPlan {
    pub parts_per_object: u32,
    pub background_distractors: u32,
    pub include_envelope: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub height: u32,
    pub width: u32,
    pub objects: Vec<ObjectSpec>,
    pub degradation: Degradation,
    pub mask_plan: MaskPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub gt: LabelMap,
    pub pseudo: LabelMap,
    pub masks: Vec<BinaryMask>,
}

fn rasterize(shape: ShapeKind, b: &Bounds, height: u32, width: u32) -> BinaryMask {
    match shape {
        ShapeKind::Rectangle => BinaryMask::from_fn(height, width, |x, y| b.contains(x, y)),
        ShapeKind::Ellipse => BinaryMask::from_fn(height, width, |x, y| {
            if !b.contains(x, y) {
                return false;
            }
            // pixel center (x+0.5, y+0.5) inside the ellipse inscribed in the
            // bounds, in pure integer arithmetic
            let dx = 2 * (x as i128 - b.x as i128) + 1 - b.width as i128;
            let dy = 2 * (y as i128 - b.y as i128) + 1 - b.height as i128;
            let rw = b.width as i128;
            let rh = b.height as i128;
            dx * dx * rh * rh + dy * dy * rw * rw <= rw * rw * rh * rh
        }),
    }
}

fn shrunk_bounds(rng: &mut ChaCha8Rng, b: &Bounds, fraction: f64, centered: bool) -> Bounds {
    let dw = (b.width as f64 * fraction) as u32;
    let dh = (b.height as f64 * fraction) as u32;
    let (left, top) = if centered {
        (dw / 2, dh / 2)
    } else {
        (rng.gen_range(0..=dw), rng.gen_range(0..=dh))
    };
    Bounds {
        x: b.x + left,
        y: b.y + top,
        width: b.width - dw,
        height: b.height - dh,
    }
}

fn grown_bounds(
    rng: &mut ChaCha8Rng,
    b: &Bounds,
    fraction: f64,
    height: u32,
    width: u32,
) -> Bounds {
    let dw = (b.width as f64 * fraction) as u32;
    let dh = (b.height as f64 * fraction) as u32;
    let left = rng.gen_range(0..=dw);
    let top = rng.gen_range(0..=dh);
    let x = b.x.saturating_sub(left);
    let y = b.y.saturating_sub(top);
    let x2 = (b.x + b.width + (dw - left)).min(width);
    let y2 = (b.y + b.height + (dh - top)).min(height);
    Bounds {
        x,
        y,
        width: x2 - x,
        height: y2 - y,
    }
}

fn validate_spec(spec: &SceneSpec) -> Result<(), SynthError> {
    if spec.height == 0 || spec.width == 0 {
        return Err(infeasible("canvas dimensions must be positive"));
    }
    for frac in [
        spec.degradation.erode_fraction,
        spec.degradation.spill_fraction,
    ] {
        if !(0.0..1.0).contains(&frac) {
            return Err(infeasible("degradation fractions must lie in [0, 1)"));
        }
    }
    for obj in &spec.objects {
        if obj.class_id == 0 || obj.class_id == IGNORE_LABEL {
            return Err(infeasible("object class id is reserved"));
        }
        if obj.bounds.width == 0 || obj.bounds.height == 0 {
            return Err(infeasible("object bounds are empty"));
        }
        if obj.bounds.x + obj.bounds.width > spec.width
            || obj.bounds.y + obj.bounds.height > spec.height
        {
            return Err(infeasible("object bounds fall outside the canvas"));
        }
    }
    Ok(())
}

/// Splits an object's pixel set into up to `want` connected-by-construction
/// parts using random axis-aligned cuts of the largest remaining part.
fn split_parts(
    rng: &mut ChaCha8Rng,
    object: &BinaryMask,
    want: u32,
    height: u32,
    width: u32,
) -> Vec<BinaryMask> {
    if want < 2 {
        return Vec::new();
    }
    let mut pixels = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if object.get(x, y) {
                pixels.push((x, y));
            }
        }
    }
    let mut parts: Vec<Vec<(u32, u32)>> = vec![pixels];
    while (parts.len() as u32) < want {
        let idx = parts
            .iter()
            .enumerate()
            .max_by_key(|(_, p)| p.len())
            .map(|(i, _)| i)
            .expect("parts list never empties");
        let part = &parts[idx];
        let (mut x0, mut x1, mut y0, mut y1) = (u32::MAX, 0u32, u32::MAX, 0u32);
        for &(x, y) in part {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let can_vertical = x1 > x0;
        let can_horizontal = y1 > y0;
        let vertical = match (can_vertical, can_horizontal) {
            (true, true) => rng.gen_bool(0.5),
            (true, false) => true,
            (false, true) => false,
            (false, false) => break,
        };
        let part = parts.swap_remove(idx);
        let (a, b): (Vec<_>, Vec<_>) = if vertical {
            let cut = rng.gen_range(x0 + 1..=x1);
            part.into_iter().partition(|&(x, _)| x < cut)
        } else {
            let cut = rng.gen_range(y0 + 1..=y1);
            part.into_iter().partition(|&(_, y)| y < cut)
        };
        parts.push(a);
        parts.push(b);
    }
    parts
        .into_iter()
        .filter(|p| !p.is_empty())
        .map(|p| {
            let mut mask = BinaryMask::new(height, width);
            for (x, y) in p {
                mask.set(x, y, true);
            }
            mask
        })
        .collect()
}

/// Builds the scene deterministically from its spec.
///
/// Guarantees, by construction and checked here:
/// - with `spill_fraction == 0`, every pseudo slice is a nonempty subset of
///   its object;
/// - with `erode_fraction == 0`, every pseudo slice contains its object;
/// - pseudo slices never touch each other or other objects (otherwise the
///   spec is rejected as infeasible);
/// - every background distractor overlaps at most half the pseudo
///   foreground it touches, relative to its own area, and covers at most
///   0.85 of any single slice, so default-threshold selection never keeps
///   one.
pub fn generate(spec: &SceneSpec) -> Result<Scene, SynthError> {
    validate_spec(spec)?;
    let (height, width) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let exacts: Vec<BinaryMask> = spec
        .objects
        .iter()
        .map(|obj| rasterize(obj.shape, &obj.bounds, height, width))
        .collect();

    let mut gt = LabelMap::new(height, width);
    for (obj, exact) in spec.objects.iter().zip(&exacts) {
        if exact.area() == 0 {
            return Err(infeasible("object rasterizes to an empty region"));
        }
        for y in 0..height {
            for x in 0..width {
                if exact.get(x, y) {
                    if gt.get(x, y) != 0 {
                        return Err(infeasible("objects overlap"));
                    }
                    gt.set(x, y, obj.class_id);
                }
            }
        }
    }

    let mut pseudo = LabelMap::new(height, width);
    for (obj, exact) in spec.objects.iter().zip(&exacts) {
        let erode = spec.degradation.erode_fraction;
        let spill = spec.degradation.spill_fraction;

        let mut region = if erode > 0.0 {
            let shrunk = shrunk_bounds(&mut rng, &obj.bounds, erode, false);
            let mut candidate = rasterize(obj.shape, &shrunk, height, width);
            candidate = intersect(&candidate, exact);
            if candidate.area() == 0 {
                // random offsets can miss an ellipse entirely; retry centered
                let shrunk = shrunk_bounds(&mut rng, &obj.bounds, erode, true);
                candidate = intersect(&rasterize(obj.shape, &shrunk, height, width), exact);
            }
            if candidate.area() == 0 {
                exact.clone()
            } else {
                candidate
            }
        } else {
            exact.clone()
        };

        if spill > 0.0 {
            let grown = grown_bounds(&mut rng, &obj.bounds, spill, height, width);
            let spilled = rasterize(obj.shape, &grown, height, width);
            region.or_assign(&spilled);
            if erode == 0.0 {
                // pure false activation: keep the region a true dilation
                region.or_assign(exact);
            }
        }

        for y in 0..height {
            for x in 0..width {
                if region.get(x, y) {
                    if pseudo.get(x, y) != 0 {
                        return Err(infeasible("pseudo regions overlap"));
                    }
                    let under = gt.get(x, y);
                    if under != 0 && under != obj.class_id {
                        return Err(infeasible("pseudo region crosses another object"));
                    }
                    pseudo.set(x, y, obj.class_id);
                }
            }
        }
    }

    let mut masks = Vec::new();
    masks.extend(exacts.iter().cloned());
    for exact in &exacts {
        masks.extend(split_parts(
            &mut rng,
            exact,
            spec.mask_plan.parts_per_object,
            height,
            width,
        ));
    }

    let slice_areas: BTreeMap<u8, u64> = pseudo
        .present_classes()
        .into_iter()
        .map(|k| (k, pseudo.count_of(k)))
        .collect();
    for _ in 0..spec.mask_plan.background_distractors {
        for _attempt in 0..24 {
            let dw = rng.gen_range(2..=(width / 4).max(2));
            let dh = rng.gen_range(2..=(height / 4).max(2));
            if dw > width || dh > height {
                continue;
            }
            let dx = rng.gen_range(0..=width - dw);
            let dy = rng.gen_range(0..=height - dh);
            let rect = Bounds {
                x: dx,
                y: dy,
                width: dw,
                height: dh,
            };
            let mut per_class: BTreeMap<u8, u64> = BTreeMap::new();
            for y in dy..dy + dh {
                for x in dx..dx + dw {
                    let v = pseudo.get(x, y);
                    if v != 0 && v != IGNORE_LABEL {
                        *per_class.entry(v).or_default() += 1;
                    }
                }
            }
            let rect_area = (dw as u64 * dh as u64) as f64;
            let touched: u64 = per_class.values().sum();
            let overlap_ok = touched as f64 / rect_area <= DEFAULT_MASK_COVERAGE_THRESHOLD;
            let coverage_ok = per_class.iter().all(|(k, &inter)| {
                inter as f64 / slice_areas[k] as f64 <= DEFAULT_LABEL_COVERAGE_THRESHOLD
            });
            if overlap_ok && coverage_ok {
                masks.push(rasterize(ShapeKind::Rectangle, &rect, height, width));
                break;
            }
        }
    }

    if spec.mask_plan.include_envelope && !spec.objects.is_empty() {
        let idx = rng.gen_range(0..spec.objects.len());
        let b = spec.objects[idx].bounds;
        let pad_x = b.width / 2 + 1;
        let pad_y = b.height / 2 + 1;
        let x = b.x.saturating_sub(pad_x);
        let y = b.y.saturating_sub(pad_y);
        let x2 = (b.x + b.width + pad_x).min(width);
        let y2 = (b.y + b.height + pad_y).min(height);
        let envelope = Bounds {
            x,
            y,
            width: x2 - x,
            height: y2 - y,
        };
        masks.push(rasterize(ShapeKind::Rectangle, &envelope, height, width));
    }

    Ok(Scene { gt, pseudo, masks })
}

fn intersect(a: &BinaryMask, b: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(a.height(), a.width(), |x, y| a.get(x, y) && b.get(x, y))
}

/// Which degradation a generated family applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// No degradation: pseudo equals ground truth.
    Clean,
    /// Labels shrink to a sub-region of each object.
    PartialActivation,
    /// Labels spill past each object onto background.
    FalseActivation,
    /// Alternate partial/false per scene.
    Mixed,
    /// Partial activation plus an oversized envelope mask per scene.
    Envelope,
}

/// Parameters for a reproducible corpus of scenes. Objects are placed on a
/// 2x2 cell grid with margins sized so that degraded label regions never
/// collide, keeping [`generate`] conflict-free for every seed.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    pub seed: u64,
    pub scenes: u32,
    pub height: u32,
    pub width: u32,
    /// Foreground classes are drawn from `1..=num_classes`.
    pub num_classes: u8,
    pub min_objects: u32,
    pub max_objects: u32,
    pub parts_per_object: u32,
    pub background_distractors: u32,
}

impl FamilyConfig {
    pub fn new(
        kind: FamilyKind,
        seed: u64,
        scenes: u32,
        height: u32,
        width: u32,
        num_classes: u8,
    ) -> Self {
        Self {
            kind,
            seed,
            scenes,
            height,
            width,
            num_classes,
            min_objects: 1.min(num_classes as u32),
            max_objects: 4.min(num_classes as u32),
            parts_per_object: 3,
            background_distractors: 2,
        }
    }
}

/// Builds the scene specs of a family; feed each to [`generate`].
pub fn build_family(cfg: &FamilyConfig) -> Result<Vec<SceneSpec>, SynthError> {
    if cfg.height < 32 || cfg.width < 32 {
        return Err(infeasible("family canvases must be at least 32x32"));
    }
    if cfg.num_classes == 0 || cfg.num_classes == IGNORE_LABEL {
        return Err(infeasible("family class count must be in 1..=254"));
    }
    let cap = 4.min(cfg.num_classes as u32);
    if cfg.min_objects > cfg.max_objects || cfg.max_objects > cap {
        return Err(infeasible(
            "family object range exceeds the cell grid or class count",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cell_w = cfg.width / 2;
    let cell_h = cfg.height / 2;

    let mut specs = Vec::with_capacity(cfg.scenes as usize);
    for scene_idx in 0..cfg.scenes {
        let seed = rng.gen::<u64>();
        let (erode, spill) = match cfg.kind {
            FamilyKind::Clean => (0.0, 0.0),
            FamilyKind::PartialActivation | FamilyKind::Envelope => (rng.gen_range(0.2..0.6), 0.0),
            FamilyKind::FalseActivation => (0.0, rng.gen_range(0.15..0.45)),
            FamilyKind::Mixed => {
                if scene_idx % 2 == 0 {
                    (rng.gen_range(0.2..0.6), 0.0)
                } else {
                    (0.0, rng.gen_range(0.15..0.45))
                }
            }
        };

        let n = rng.gen_range(cfg.min_objects..=cfg.max_objects) as usize;
        let mut classes: Vec<u8> = (1..=cfg.num_classes).collect();
        classes.shuffle(&mut rng);
        let mut cells = [(0u32, 0u32), (1, 0), (0, 1), (1, 1)];
        cells.shuffle(&mut rng);

        let mut objects = Vec::with_capacity(n);
        for i in 0..n {
            let (cx, cy) = cells[i];
            let min_w = 4.max(cell_w / 3);
            let min_h = 4.max(cell_h / 3);
            let w = rng.gen_range(min_w..=(cell_w / 2).max(min_w));
            let h = rng.gen_range(min_h..=(cell_h / 2).max(min_h));
            let dw = (w as f64 * spill) as u32;
            let dh = (h as f64 * spill) as u32;
            let x = cx * cell_w + rng.gen_range(dw..=cell_w - w - dw);
            let y = cy * cell_h + rng.gen_range(dh..=cell_h - h - dh);
            objects.push(ObjectSpec {
                class_id: classes[i],
                shape: if rng.gen_bool(0.5) {
                    ShapeKind::Rectangle
                } else {
                    ShapeKind::Ellipse
                },
                bounds: Bounds {
                    x,
                    y,
                    width: w,
                    height: h,
                },
            });
        }

        specs.push(SceneSpec {
            seed,
            height: cfg.height,
            width: cfg.width,
            objects,
            degradation: Degradation {
                erode_fraction: erode,
                spill_fraction: spill,
            },
            mask_plan: MaskPlan {
                parts_per_object: cfg.parts_per_object,
                background_distractors: cfg.background_distractors,
                include_envelope: matches!(cfg.kind, FamilyKind::Envelope),
            },
        });
    }
    Ok(specs)
}

/// Unstructured random instance for oracle fuzzing: a label map painted with
/// random overlapping shapes plus a sprinkle of ignore pixels, and a mask bag
/// mixing arbitrary shapes, slice-derived masks (exact copies, bounding-box
/// dilations, partial chunks), duplicates, and the occasional empty mask.
pub fn random_instance(
    seed: u64,
    height: u32,
    width: u32,
    max_classes: u8,
    max_masks: u32,
) -> (LabelMap, Vec<BinaryMask>) {
    assert!((1..IGNORE_LABEL).contains(&max_classes));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let random_bounds = |rng: &mut ChaCha8Rng| {
        let w = rng.gen_range(1..=width);
        let h = rng.gen_range(1..=height);
        Bounds {
            x: rng.gen_range(0..=width - w),
            y: rng.gen_range(0..=height - h),
            width: w,
            height: h,
        }
    };
    let random_shape = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            ShapeKind::Rectangle
        } else {
            ShapeKind::Ellipse
        }
    };

    let mut map = LabelMap::new(height, width);
    let n_shapes = rng.gen_range(0..=max_classes as u32 + 2);
    for _ in 0..n_shapes {
        let class = rng.gen_range(1..=max_classes);
        let bounds = random_bounds(&mut rng);
        let raster = rasterize(random_shape(&mut rng), &bounds, height, width);
        for y in 0..height {
            for x in 0..width {
                if raster.get(x, y) {
                    map.set(x, y, class);
                }
            }
        }
    }
    if rng.gen_bool(0.5) {
        let speckles = rng.gen_range(0..=(height * width / 16).max(1));
        for _ in 0..speckles {
            map.set(
                rng.gen_range(0..width),
                rng.gen_range(0..height),
                IGNORE_LABEL,
            );
        }
    }

    let classes = map.present_classes();
    let n_masks = rng.gen_range(0..=max_masks);
    let mut masks: Vec<BinaryMask> = Vec::with_capacity(n_masks as usize);
    for _ in 0..n_masks {
        let style = rng.gen_range(0u32..8);
        let mask = match style {
            // exact copy of a random class slice
            0 if !classes.is_empty() => {
                let k = classes[rng.gen_range(0..classes.len())];
                map.slice_of(k).expect("present class").into_region()
            }
            // rectangle over a slice's bounding box, padded outward
            1 if !classes.is_empty() => {
                let k = classes[rng.gen_range(0..classes.len())];
                let region = map.slice_of(k).expect("present class").into_region();
                let mut bbox: Option<(u32, u32, u32, u32)> = None;
                for y in 0..height {
                    for x in 0..width {
                        if region.get(x, y) {
                            let (x0, y0, x1, y1) = bbox.unwrap_or((x, y, x, y));
                            bbox = Some((x0.min(x), y0.min(y), x1.max(x), y1.max(y)));
                        }
                    }
                }
                let (x0, y0, x1, y1) = bbox.expect("present class is nonempty");
                let pad = rng.gen_range(0..=3);
                let gx = x0.saturating_sub(pad);
                let gy = y0.saturating_sub(pad);
                let bounds = Bounds {
                    x: gx,
                    y: gy,
                    width: (x1 + 1 + pad).min(width) - gx,
                    height: (y1 + 1 + pad).min(height) - gy,
                };
                rasterize(ShapeKind::Rectangle, &bounds, height, width)
            }
            // partial chunk of a slice
            2 if !classes.is_empty() => {
                let k = classes[rng.gen_range(0..classes.len())];
                let region = map.slice_of(k).expect("present class").into_region();
                let window = rasterize(
                    ShapeKind::Rectangle,
                    &random_bounds(&mut rng),
                    height,
                    width,
                );
                intersect(&region, &window)
            }
            // duplicate of an earlier mask, to exercise ordering ties
            3 if !masks.is_empty() => masks[rng.gen_range(0..masks.len())].clone(),
            // deliberately empty
            4 if rng.gen_bool(0.2) => BinaryMask::new(height, width),
            _ => rasterize(
                random_shape(&mut rng),
                &random_bounds(&mut rng),
                height,
                width,
            ),
        };
        masks.push(mask);
    }
    (map, masks)
}

/// Stress scene: the pseudo-labels activate on the wrong object, so
/// enhancement faithfully transfers the wrong object's boundary. Documents
/// a known failure mode rather than an improvement case.
pub fn wrong_object_scene() -> Scene {
    let (height, width) = (32, 32);
    let object_a = rasterize(
        ShapeKind::Rectangle,
        &Bounds {
            x: 3,
            y: 4,
            width: 8,
            height: 8,
        },
        height,
        width,
    );
    let object_b = rasterize(
        ShapeKind::Rectangle,
        &Bounds {
            x: 18,
            y: 16,
            width: 9,
            height: 9,
        },
        height,
        width,
    );
    let mut gt = LabelMap::new(height, width);
    for y in 0..height {
        for x in 0..width {
            if object_a.get(x, y) {
                gt.set(x, y, 1);
            } else if object_b.get(x, y) {
                gt.set(x, y, 2);
            }
        }
    }
    // the class-1 seed lands on object B's footprint
    let mut pseudo = LabelMap::new(height, width);
    for y in 18..23 {
        for x in 20..25 {
            pseudo.set(x, y, 1);
        }
    }
    Scene {
        gt,
        pseudo,
        masks: vec![object_a, object_b],
    }
}

/// Stress scene: the generator produced no mask for the object, so the
/// (eroded) pseudo-labels fall back unchanged and nothing improves.
pub fn missing_mask_scene() -> Scene {
    let (height, width) = (32, 32);
    let object = rasterize(
        ShapeKind::Ellipse,
        &Bounds {
            x: 6,
            y: 6,
            width: 14,
            height: 12,
        },
        height,
        width,
    );
    let mut gt = LabelMap::new(height, width);
    let mut pseudo = LabelMap::new(height, width);
    for y in 0..height {
        for x in 0..width {
            if object.get(x, y) {
                gt.set(x, y, 1);
                // partial activation: only the left half of the object
                if x < 12 {
                    pseudo.set(x, y, 1);
                }
            }
        }
    }
    // only a far-away background mask is available
    let distractor = rasterize(
        ShapeKind::Rectangle,
        &Bounds {
            x: 24,
            y: 24,
            width: 6,
            height: 6,
        },
        height,
        width,
    );
    Scene {
        gt,
        pseudo,
        masks: vec![distractor],
    }
}

// ---------------------------------------------------------------------------
// Naive reference pipeline
// ---------------------------------------------------------------------------

struct ByteRaster {
    data: Vec<u8>,
    height: u32,
    width: u32,
}

impl ByteRaster {
    fn from_mask(mask: &BinaryMask) -> Self {
        let mut data = Vec::with_capacity((mask.height() * mask.width()) as usize);
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                data.push(mask.get(x, y) as u8);
            }
        }
        Self {
            data,
            height: mask.height(),
            width: mask.width(),
        }
    }

    fn at(&self, x: u32, y: u32) -> u8 {
        self.data[(y * self.width + x) as usize]
    }

    fn area(&self) -> u64 {
        self.data.iter().filter(|&&v| v != 0).count() as u64
    }

    fn first_set_column_major(&self) -> Option<u64> {
        for x in 0..self.width {
            for y in 0..self.height {
                if self.at(x, y) != 0 {
                    return Some(x as u64 * self.height as u64 + y as u64);
                }
            }
        }
        None
    }

    fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_fn(self.height, self.width, |x, y| self.at(x, y) != 0)
    }
}

/// Straight-line per-pixel implementation of the full enhancement pipeline,
/// contract-identical to [`crate::sepl::enhance_image`]. No packed-word
/// operations, no shared raster algebra: every count is a double loop.
pub fn reference_sepl(
    pseudo: &LabelMap,
    masks: &[BinaryMask],
    cfg: &SeplConfig,
) -> Result<SelectionOutcome, SeplError> {
    let (height, width) = (pseudo.height(), pseudo.width());
    for mask in masks {
        if mask.height() != height || mask.width() != width {
            return Err(crate::mask::MaskError::DimensionMismatch {
                left_height: mask.height(),
                left_width: mask.width(),
                right_height: height,
                right_width: width,
            }
            .into());
        }
    }

    let rasters: Vec<ByteRaster> = masks.iter().map(ByteRaster::from_mask).collect();

    // canonical order: area descending, first column-major pixel, input index
    let mut keys: Vec<(u64, u64, usize)> = rasters
        .iter()
        .enumerate()
        .map(|(i, r)| (r.area(), r.first_set_column_major().unwrap_or(u64::MAX), i))
        .collect();
    keys.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let canonical_order: Vec<usize> = keys.iter().map(|&(_, _, i)| i).collect();

    // classes present in the pseudo-labels, ascending
    let mut class_seen = [false; 256];
    for y in 0..height {
        for x in 0..width {
            class_seen[pseudo.get(x, y) as usize] = true;
        }
    }
    let classes: Vec<u8> = (1..IGNORE_LABEL)
        .filter(|&k| class_seen[k as usize])
        .collect();

    let mut slice_area: BTreeMap<u8, u64> = BTreeMap::new();
    for &k in &classes {
        let mut count = 0u64;
        for y in 0..height {
            for x in 0..width {
                if pseudo.get(x, y) == k {
                    count += 1;
                }
            }
        }
        slice_area.insert(k, count);
    }

    let intersect_class = |raster: &ByteRaster, k: u8| {
        let mut count = 0u64;
        for y in 0..height {
            for x in 0..width {
                if raster.at(x, y) != 0 && pseudo.get(x, y) == k {
                    count += 1;
                }
            }
        }
        count
    };

    // assignment: arg-max intersection, lowest class on ties, zero discarded
    let mut assigned: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    let mut discarded = Vec::new();
    for (slot, &input_idx) in canonical_order.iter().enumerate() {
        let raster = &rasters[input_idx];
        let mut best: Option<(u8, u64)> = None;
        for &k in &classes {
            let inter = intersect_class(raster, k);
            if inter > best.map_or(0, |(_, i)| i) {
                best = Some((k, inter));
            }
        }
        match best {
            Some((k, _)) => assigned.entry(k).or_default().push(slot),
            None => discarded.push(slot),
        }
    }

    // selection and per-class merge
    let mut per_class = BTreeMap::new();
    for &k in &classes {
        let label_area = slice_area[&k];
        let mut selections = Vec::new();
        let mut kept_slots = Vec::new();
        for &slot in assigned.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
            let raster = &rasters[canonical_order[slot]];
            let inter = intersect_class(raster, k) as f64;
            let mask_coverage = inter / raster.area() as f64;
            let label_coverage = inter / label_area as f64;
            let by_mask = mask_coverage > cfg.mask_coverage_threshold();
            let by_label = label_coverage > cfg.label_coverage_threshold();
            let rule = match (by_mask, by_label) {
                (true, true) => SelectionRule::Both,
                (true, false) => SelectionRule::MaskCoverage,
                (false, true) => SelectionRule::LabelCoverage,
                (false, false) => continue,
            };
            selections.push(SelectedMask {
                mask: Some(slot),
                mask_coverage,
                label_coverage,
                rule,
            });
            kept_slots.push(slot);
        }

        let mut merged = ByteRaster {
            data: vec![0; (height * width) as usize],
            height,
            width,
        };
        if kept_slots.is_empty() {
            selections.push(SelectedMask {
                mask: None,
                mask_coverage: 1.0,
                label_coverage: 1.0,
                rule: SelectionRule::FallbackOriginal,
            });
            for y in 0..height {
                for x in 0..width {
                    if pseudo.get(x, y) == k {
                        merged.data[(y * width + x) as usize] = 1;
                    }
                }
            }
        } else {
            for &slot in &kept_slots {
                let raster = &rasters[canonical_order[slot]];
                for y in 0..height {
                    for x in 0..width {
                        if raster.at(x, y) != 0 {
                            merged.data[(y * width + x) as usize] = 1;
                        }
                    }
                }
            }
        }

        per_class.insert(
            k,
            ClassEnhancement {
                selections,
                enhanced: merged.to_mask(),
            },
        );
    }

    // flatten: sort-and-paint
    let mut paint_order: Vec<(u8, u64)> = per_class
        .iter()
        .map(|(&k, e)| (k, e.enhanced.area()))
        .collect();
    match cfg.flatten_policy() {
        FlattenPolicy::SmallerRegionLast => {
            paint_order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)))
        }
        FlattenPolicy::HigherClassLast => paint_order.sort_by_key(|&(k, _)| k),
    }
    let mut flat = vec![0u8; (height * width) as usize];
    for (k, _) in paint_order {
        let enhanced = &per_class[&k].enhanced;
        for y in 0..height {
            for x in 0..width {
                if enhanced.get(x, y) {
                    flat[(y * width + x) as usize] = k;
                }
            }
        }
    }

    Ok(SelectionOutcome {
        canonical_order,
        per_class,
        discarded,
        flat: LabelMap::from_raw(height, width, flat),
    })
}
