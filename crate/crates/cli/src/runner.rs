//! Batch commands over manifests: enhance a dataset, evaluate label
//! quality, synthesize corpora, threshold activation stacks, and inspect
//! mask files.
//!
//! Images are processed on a work pool; each worker owns its image end to
//! end and writes only that image's outputs, so results are byte-identical
//! at any worker count. Per-image failures are recorded and skipped, never
//! fatal; summaries carry no timing or machine-specific data.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sepl_core::{
    build_family, cam_to_label_map, enhance_image, generate, ConfusionMatrix, FamilyConfig,
    FamilyKind, FlattenPolicy, LabelMap, MetricsReport, SelectionOutcome, SeplConfig,
};

use crate::cam::read_score_stack;
use crate::io::{
    read_label_png, read_mask_records, write_label_png, write_mask_records, DatasetManifest,
    IoError, ManifestEntry, MaskIngest, QualityFilter,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Human,
    Machine,
}

/// Everything one `enhance` run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub sepl: SeplConfig,
    pub filter: QualityFilter,
    pub workers: usize,
    pub format: ReportFormat,
}

pub fn flatten_policy_name(policy: FlattenPolicy) -> &'static str {
    match policy {
        FlattenPolicy::SmallerRegionLast => "smaller-region-last",
        FlattenPolicy::HigherClassLast => "higher-class-last",
    }
}

fn rule_name(rule: sepl_core::SelectionRule) -> &'static str {
    match rule {
        sepl_core::SelectionRule::MaskCoverage => "mask-coverage",
        sepl_core::SelectionRule::LabelCoverage => "label-coverage",
        sepl_core::SelectionRule::Both => "both",
        sepl_core::SelectionRule::FallbackOriginal => "fallback-original",
    }
}

// ---------------------------------------------------------------------------
// enhance
// ---------------------------------------------------------------------------

/// One kept mask in an outcome record. `mask_record` is the index of the
/// source record in the image's mask file (`None` for the fallback entry).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub mask_record: Option<usize>,
    pub mask_coverage: f64,
    pub label_coverage: f64,
    pub rule: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassOutcomeRecord {
    pub class_id: u8,
    pub fallback: bool,
    pub selections: Vec<SelectionRecord>,
}

/// Audit record persisted next to each enhanced label map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageOutcomeRecord {
    pub id: String,
    pub height: u32,
    pub width: u32,
    pub t1: f64,
    pub t2: f64,
    pub flatten: String,
    /// Masks that survived ingestion and entered assignment.
    pub masks_used: usize,
    /// Masks assigned to no class (zero overlap everywhere).
    pub masks_discarded: usize,
    pub classes: Vec<ClassOutcomeRecord>,
}

/// Selection-rule tallies; class counts attribute a class to every rule that
/// kept at least one of its masks, so the per-rule counts may overlap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionStats {
    pub classes_total: u64,
    pub classes_with_mask_coverage: u64,
    pub classes_with_label_coverage: u64,
    pub classes_fallback: u64,
    pub masks_selected: u64,
    pub selected_by_mask_coverage: u64,
    pub selected_by_label_coverage: u64,
    pub selected_by_both: u64,
}

impl SelectionStats {
    pub fn absorb_record(&mut self, record: &ImageOutcomeRecord) {
        for class in &record.classes {
            self.classes_total += 1;
            if class.fallback {
                self.classes_fallback += 1;
                continue;
            }
            let mut any_mask = false;
            let mut any_label = false;
            for sel in &class.selections {
                match sel.rule.as_str() {
                    "mask-coverage" => {
                        self.selected_by_mask_coverage += 1;
                        any_mask = true;
                    }
                    "label-coverage" => {
                        self.selected_by_label_coverage += 1;
                        any_label = true;
                    }
                    "both" => {
                        self.selected_by_both += 1;
                        any_mask = true;
                        any_label = true;
                    }
                    _ => {}
                }
                self.masks_selected += 1;
            }
            if any_mask {
                self.classes_with_mask_coverage += 1;
            }
            if any_label {
                self.classes_with_label_coverage += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedImage {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnhanceSummary {
    pub t1: f64,
    pub t2: f64,
    pub flatten: String,
    pub filter_enabled: bool,
    pub pred_iou_min: f64,
    pub stability_min: f64,
    pub images_processed: usize,
    pub images_skipped: Vec<SkippedImage>,
    pub masks_used: u64,
    pub masks_discarded: u64,
    #[serde(flatten)]
    pub stats: SelectionStats,
    pub fraction_classes_mask_coverage: Option<f64>,
    pub fraction_classes_label_coverage: Option<f64>,
    pub fraction_classes_fallback: Option<f64>,
}

struct ImageResult {
    record: ImageOutcomeRecord,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.contains(['/', '\\']) && id != "." && id != ".." && id != "summary"
}

fn process_entry(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    cfg: &RunConfig,
) -> Result<ImageResult, String> {
    if !valid_id(&entry.id) {
        return Err(format!("invalid image id {:?}", entry.id));
    }
    let pseudo = read_label_png(&manifest.resolve(&entry.pseudo), manifest.num_classes)
        .map_err(|e| e.to_string())?;
    let ingest: MaskIngest = read_mask_records(&manifest.resolve(&entry.masks), &cfg.filter)
        .map_err(|e| e.to_string())?;
    for mask in &ingest.masks {
        if mask.height() != pseudo.height() || mask.width() != pseudo.width() {
            return Err(format!(
                "mask raster {}x{} does not match label raster {}x{}",
                mask.height(),
                mask.width(),
                pseudo.height(),
                pseudo.width()
            ));
        }
    }

    let outcome = enhance_image(&pseudo, &ingest.masks, &cfg.sepl).map_err(|e| e.to_string())?;
    let record = outcome_record(&entry.id, &pseudo, &outcome, &ingest, &cfg.sepl);

    let label_path = cfg.out_dir.join(format!("{}.png", entry.id));
    write_label_png(&label_path, &outcome.flat).map_err(|e| e.to_string())?;
    let record_path = cfg.out_dir.join(format!("{}.outcome.json", entry.id));
    let mut bytes = serde_json::to_vec_pretty(&record).expect("record serializes");
    bytes.push(b'\n');
    std::fs::write(&record_path, bytes)
        .map_err(|e| format!("cannot write {}: {e}", record_path.display()))?;

    Ok(ImageResult { record })
}

fn outcome_record(
    id: &str,
    pseudo: &LabelMap,
    outcome: &SelectionOutcome,
    ingest: &MaskIngest,
    sepl: &SeplConfig,
) -> ImageOutcomeRecord {
    let classes = outcome
        .per_class
        .iter()
        .map(|(&class_id, enhancement)| ClassOutcomeRecord {
            class_id,
            fallback: enhancement.is_fallback(),
            selections: enhancement
                .selections
                .iter()
                .map(|sel| SelectionRecord {
                    mask_record: sel
                        .mask
                        .map(|slot| ingest.source_records[outcome.canonical_order[slot]]),
                    mask_coverage: sel.mask_coverage,
                    label_coverage: sel.label_coverage,
                    rule: rule_name(sel.rule).to_string(),
                })
                .collect(),
        })
        .collect();
    ImageOutcomeRecord {
        id: id.to_string(),
        height: pseudo.height(),
        width: pseudo.width(),
        t1: sepl.mask_coverage_threshold(),
        t2: sepl.label_coverage_threshold(),
        flatten: flatten_policy_name(sepl.flatten_policy()).to_string(),
        masks_used: ingest.masks.len(),
        masks_discarded: outcome.discarded.len(),
        classes,
    }
}

fn build_pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    if workers == 0 {
        bail!("worker count must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot build worker pool")
}

/// Enhances every image in the manifest, writing `<id>.png`,
/// `<id>.outcome.json`, and a `summary.json` into the output directory.
/// Per-image failures are collected in the summary, not raised.
pub fn cmd_enhance(cfg: &RunConfig) -> anyhow::Result<EnhanceSummary> {
    let manifest = DatasetManifest::read(&cfg.manifest)?;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    let pool = build_pool(cfg.workers)?;

    let results: Vec<Result<ImageResult, String>> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| process_entry(&manifest, entry, cfg))
            .collect()
    });

    let mut stats = SelectionStats::default();
    let mut skipped = Vec::new();
    let mut processed = 0usize;
    let mut masks_used = 0u64;
    let mut masks_discarded = 0u64;
    for (entry, result) in manifest.entries.iter().zip(results) {
        match result {
            Ok(image) => {
                processed += 1;
                masks_used += image.record.masks_used as u64;
                masks_discarded += image.record.masks_discarded as u64;
                stats.absorb_record(&image.record);
            }
            Err(reason) => skipped.push(SkippedImage {
                id: entry.id.clone(),
                reason,
            }),
        }
    }

    let fraction =
        |n: u64| (stats.classes_total > 0).then(|| n as f64 / stats.classes_total as f64);
    let summary = EnhanceSummary {
        t1: cfg.sepl.mask_coverage_threshold(),
        t2: cfg.sepl.label_coverage_threshold(),
        flatten: flatten_policy_name(cfg.sepl.flatten_policy()).to_string(),
        filter_enabled: cfg.filter.enabled,
        pred_iou_min: cfg.filter.min_predicted_iou,
        stability_min: cfg.filter.min_stability,
        images_processed: processed,
        images_skipped: skipped,
        masks_used,
        masks_discarded,
        fraction_classes_mask_coverage: fraction(stats.classes_with_mask_coverage),
        fraction_classes_label_coverage: fraction(stats.classes_with_label_coverage),
        fraction_classes_fallback: fraction(stats.classes_fallback),
        stats,
    };

    let summary_path = cfg.out_dir.join("summary.json");
    let mut bytes = serde_json::to_vec_pretty(&summary)?;
    bytes.push(b'\n');
    std::fs::write(&summary_path, bytes)
        .with_context(|| format!("cannot write {}", summary_path.display()))?;
    Ok(summary)
}

/// Rebuilds the selection statistics from the persisted outcome records in
/// an output directory.
pub fn recompute_stats(out_dir: &Path) -> anyhow::Result<SelectionStats> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(out_dir)
        .with_context(|| format!("cannot list {}", out_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".outcome.json"))
        })
        .collect();
    paths.sort();
    let mut stats = SelectionStats::default();
    for path in paths {
        let data = std::fs::read_to_string(&path)?;
        let record: ImageOutcomeRecord = serde_json::from_str(&data)
            .with_context(|| format!("cannot parse {}", path.display()))?;
        stats.absorb_record(&record);
    }
    Ok(stats)
}

pub fn render_enhance_human(summary: &EnhanceSummary) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let filter = if summary.filter_enabled {
        format!(
            "pred_iou>={},stability>={}",
            summary.pred_iou_min, summary.stability_min
        )
    } else {
        "off".to_string()
    };
    let _ = writeln!(
        out,
        "enhance: t1={} t2={} flatten={} filter={}",
        summary.t1, summary.t2, summary.flatten, filter
    );
    let _ = writeln!(
        out,
        "images: {} processed, {} skipped",
        summary.images_processed,
        summary.images_skipped.len()
    );
    let pct = |f: Option<f64>| match f {
        Some(f) => format!("{:.1}%", f * 100.0),
        None => "-".to_string(),
    };
    let _ = writeln!(
        out,
        "classes: {} | mask-coverage {} ({}) | label-coverage {} ({}) | fallback {} ({})",
        summary.stats.classes_total,
        summary.stats.classes_with_mask_coverage,
        pct(summary.fraction_classes_mask_coverage),
        summary.stats.classes_with_label_coverage,
        pct(summary.fraction_classes_label_coverage),
        summary.stats.classes_fallback,
        pct(summary.fraction_classes_fallback),
    );
    let _ = writeln!(
        out,
        "masks: {} used, {} discarded, {} selected (mask-coverage {}, label-coverage {}, both {})",
        summary.masks_used,
        summary.masks_discarded,
        summary.stats.masks_selected,
        summary.stats.selected_by_mask_coverage,
        summary.stats.selected_by_label_coverage,
        summary.stats.selected_by_both,
    );
    for skip in &summary.images_skipped {
        let _ = writeln!(out, "skipped {}: {}", skip.id, skip.reason);
    }
    out
}

pub fn render_enhance_machine(summary: &EnhanceSummary) -> String {
    let mut value = serde_json::to_value(summary).expect("summary serializes");
    value["type"] = "enhance-summary".into();
    format!("{value}\n")
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MissingPair {
    pub id: String,
    /// Which side lacks the image: "prediction" or "ground-truth".
    pub missing: &'static str,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: MetricsReport,
    pub class_names: Option<Vec<String>>,
    pub pairs_scored: usize,
    pub missing: Vec<MissingPair>,
    pub failures: Vec<SkippedImage>,
}

/// Scores predictions against the ground-truth side of a manifest.
///
/// `pred` is either a directory holding `<id>.png` files (an `enhance`
/// output directory works as-is) or another manifest whose `pseudo` paths
/// serve as the predictions. Ids present on only one side are reported and
/// skipped; an empty intersection is an error.
pub fn cmd_eval(
    pred: &Path,
    gt_manifest_path: &Path,
    workers: usize,
) -> anyhow::Result<EvalOutput> {
    let gt_manifest = DatasetManifest::read(gt_manifest_path)?;
    let num_classes = gt_manifest.num_classes;
    let pool = build_pool(workers)?;

    let mut missing = Vec::new();
    let mut pairs: Vec<(String, PathBuf, PathBuf)> = Vec::new();

    let mut gt_ids = std::collections::HashSet::new();
    let mut pred_lookup: BTreeMap<String, PathBuf> = BTreeMap::new();
    if pred.is_dir() {
        for entry in
            std::fs::read_dir(pred).with_context(|| format!("cannot list {}", pred.display()))?
        {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("png") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    pred_lookup.insert(stem.to_string(), path.clone());
                }
            }
        }
    } else {
        let pred_manifest = DatasetManifest::read(pred)?;
        for entry in &pred_manifest.entries {
            pred_lookup.insert(entry.id.clone(), pred_manifest.resolve(&entry.pseudo));
        }
    }

    for entry in &gt_manifest.entries {
        gt_ids.insert(entry.id.clone());
        let Some(gt_rel) = &entry.gt else {
            missing.push(MissingPair {
                id: entry.id.clone(),
                missing: "ground-truth",
            });
            continue;
        };
        match pred_lookup.get(&entry.id) {
            Some(pred_path) => pairs.push((
                entry.id.clone(),
                pred_path.clone(),
                gt_manifest.resolve(gt_rel),
            )),
            None => missing.push(MissingPair {
                id: entry.id.clone(),
                missing: "prediction",
            }),
        }
    }
    for id in pred_lookup.keys() {
        if !gt_ids.contains(id) {
            missing.push(MissingPair {
                id: id.clone(),
                missing: "ground-truth",
            });
        }
    }

    if pairs.is_empty() {
        bail!(
            "no prediction/ground-truth pairs to score ({} ids missing a side)",
            missing.len()
        );
    }

    let results: Vec<Result<ConfusionMatrix, (String, String)>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(id, pred_path, gt_path)| {
                let score = || -> Result<ConfusionMatrix, IoError> {
                    let pred_map = read_label_png(pred_path, num_classes)?;
                    let gt_map = read_label_png(gt_path, num_classes)?;
                    let mut cm = ConfusionMatrix::new(num_classes);
                    cm.accumulate(&pred_map, &gt_map)
                        .map_err(|e| IoError::MalformedManifest {
                            path: pred_path.clone(),
                            reason: e.to_string(),
                        })?;
                    Ok(cm)
                };
                score().map_err(|e| (id.clone(), e.to_string()))
            })
            .collect()
    });

    let mut merged = ConfusionMatrix::new(num_classes);
    let mut failures = Vec::new();
    let mut pairs_scored = 0usize;
    for result in results {
        match result {
            Ok(cm) => {
                merged = merged.merge(&cm).expect("same class count");
                pairs_scored += 1;
            }
            Err((id, reason)) => failures.push(SkippedImage { id, reason }),
        }
    }
    if pairs_scored == 0 {
        bail!("every prediction/ground-truth pair failed to read");
    }

    Ok(EvalOutput {
        report: merged.report(),
        class_names: gt_manifest.class_names,
        pairs_scored,
        missing,
        failures,
    })
}

fn class_display_name(names: Option<&[String]>, class_id: u8) -> String {
    match names.and_then(|n| n.get(class_id as usize)) {
        Some(name) => name.clone(),
        None if class_id == 0 => "background".to_string(),
        None => format!("class_{class_id}"),
    }
}

pub fn render_eval_human(output: &EvalOutput) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let report = &output.report;
    let _ = writeln!(
        out,
        "eval: {} pairs scored, {} missing, {} failed, {} classes + background",
        output.pairs_scored,
        output.missing.len(),
        output.failures.len(),
        report.num_classes
    );
    let fmt = |v: Option<f64>| match v {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    };
    let _ = writeln!(
        out,
        "{:<5} {:<16} {:>8} {:>10} {:>8}",
        "class", "name", "iou", "precision", "recall"
    );
    for class in &report.per_class {
        let _ = writeln!(
            out,
            "{:<5} {:<16} {:>8} {:>10} {:>8}",
            class.class_id,
            class_display_name(output.class_names.as_deref(), class.class_id),
            fmt(class.iou),
            fmt(class.precision),
            fmt(class.recall),
        );
    }
    let _ = writeln!(out, "miou (all classes): {}", fmt(report.miou));
    let _ = writeln!(
        out,
        "mean precision all/foreground: {} / {}",
        fmt(report.mean_precision_all),
        fmt(report.mean_precision_foreground)
    );
    let _ = writeln!(
        out,
        "mean recall all/foreground: {} / {}",
        fmt(report.mean_recall_all),
        fmt(report.mean_recall_foreground)
    );
    let _ = writeln!(out, "pixels scored: {}", report.scored_pixels);
    for miss in &output.missing {
        let _ = writeln!(out, "missing {}: no {} side", miss.id, miss.missing);
    }
    for failure in &output.failures {
        let _ = writeln!(out, "failed {}: {}", failure.id, failure.reason);
    }
    out
}

pub fn render_eval_machine(output: &EvalOutput) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for class in &output.report.per_class {
        let line = serde_json::json!({
            "type": "class",
            "class_id": class.class_id,
            "name": class_display_name(output.class_names.as_deref(), class.class_id),
            "true_positives": class.true_positives,
            "false_positives": class.false_positives,
            "false_negatives": class.false_negatives,
            "iou": class.iou,
            "precision": class.precision,
            "recall": class.recall,
        });
        let _ = writeln!(out, "{line}");
    }
    let summary = serde_json::json!({
        "type": "summary",
        "num_classes": output.report.num_classes,
        "miou": output.report.miou,
        "mean_precision_all": output.report.mean_precision_all,
        "mean_recall_all": output.report.mean_recall_all,
        "mean_precision_foreground": output.report.mean_precision_foreground,
        "mean_recall_foreground": output.report.mean_recall_foreground,
        "scored_pixels": output.report.scored_pixels,
        "pairs_scored": output.pairs_scored,
        "missing_pairs": output.missing.len(),
        "read_failures": output.failures.len(),
    });
    let _ = writeln!(out, "{summary}");
    out
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

/// On-disk corpus description for `synth`.
#[derive(Debug, Clone, Deserialize)]
pub struct CorpusSpec {
    pub preset: Preset,
    pub scenes: u32,
    pub seed: u64,
    pub height: u32,
    pub width: u32,
    pub classes: u8,
    #[serde(default)]
    pub class_names: Option<Vec<String>>,
    #[serde(default)]
    pub min_objects: Option<u32>,
    #[serde(default)]
    pub max_objects: Option<u32>,
    #[serde(default)]
    pub parts_per_object: Option<u32>,
    #[serde(default)]
    pub background_distractors: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Clean,
    Partial,
    FalseActivation,
    Mixed,
    Envelope,
}

impl CorpusSpec {
    pub fn family_config(&self, seed_override: Option<u64>) -> FamilyConfig {
        let kind = match self.preset {
            Preset::Clean => FamilyKind::Clean,
            Preset::Partial => FamilyKind::PartialActivation,
            Preset::FalseActivation => FamilyKind::FalseActivation,
            Preset::Mixed => FamilyKind::Mixed,
            Preset::Envelope => FamilyKind::Envelope,
        };
        let mut cfg = FamilyConfig::new(
            kind,
            seed_override.unwrap_or(self.seed),
            self.scenes,
            self.height,
            self.width,
            self.classes,
        );
        if let Some(v) = self.min_objects {
            cfg.min_objects = v;
        }
        if let Some(v) = self.max_objects {
            cfg.max_objects = v;
        }
        if let Some(v) = self.parts_per_object {
            cfg.parts_per_object = v;
        }
        if let Some(v) = self.background_distractors {
            cfg.background_distractors = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub scenes: usize,
    pub manifest: PathBuf,
}

/// Generates a corpus from a spec file: per scene a ground-truth PNG, a
/// degraded pseudo-label PNG, and a mask-record file, plus one manifest
/// covering them all. Byte-identical for identical spec + seed.
pub fn cmd_synth(
    spec_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> anyhow::Result<SynthSummary> {
    let data = std::fs::read_to_string(spec_path)
        .with_context(|| format!("cannot read {}", spec_path.display()))?;
    let spec: CorpusSpec = serde_json::from_str(&data)
        .with_context(|| format!("cannot parse {}", spec_path.display()))?;
    if let Some(names) = &spec.class_names {
        if names.len() != spec.classes as usize + 1 {
            bail!(
                "class_names length {} must be classes + 1 = {} (background included)",
                names.len(),
                spec.classes as usize + 1
            );
        }
    }
    let family = spec.family_config(seed_override);
    let scene_specs = build_family(&family)?;

    for sub in ["gt", "pseudo", "masks"] {
        std::fs::create_dir_all(out_dir.join(sub))
            .with_context(|| format!("cannot create {}", out_dir.join(sub).display()))?;
    }

    let results: Vec<anyhow::Result<ManifestEntry>> = scene_specs
        .par_iter()
        .enumerate()
        .map(|(i, scene_spec)| {
            let id = format!("scene_{i:04}");
            let scene = generate(scene_spec)?;
            let gt_rel = format!("gt/{id}.png");
            let pseudo_rel = format!("pseudo/{id}.png");
            let masks_rel = format!("masks/{id}.json");
            write_label_png(&out_dir.join(&gt_rel), &scene.gt)?;
            write_label_png(&out_dir.join(&pseudo_rel), &scene.pseudo)?;
            write_mask_records(&out_dir.join(&masks_rel), &scene.masks)?;
            Ok(ManifestEntry {
                id,
                pseudo: pseudo_rel,
                masks: masks_rel,
                gt: Some(gt_rel),
            })
        })
        .collect();
    let entries: Vec<ManifestEntry> = results.into_iter().collect::<anyhow::Result<_>>()?;

    let manifest_path = out_dir.join("manifest.jsonl");
    DatasetManifest::write(
        &manifest_path,
        spec.classes,
        spec.class_names.as_deref(),
        &entries,
    )?;
    Ok(SynthSummary {
        scenes: entries.len(),
        manifest: manifest_path,
    })
}

// ---------------------------------------------------------------------------
// cam-threshold
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CamSummary {
    pub written: Vec<PathBuf>,
    pub failures: Vec<SkippedImage>,
}

/// Thresholds score-stack files into label PNGs ready for `enhance`.
pub fn cmd_cam_threshold(
    stacks: &[PathBuf],
    bg_threshold: f64,
    out_dir: &Path,
) -> anyhow::Result<CamSummary> {
    if !(0.0..=1.0).contains(&bg_threshold) {
        bail!("background threshold {bg_threshold} is outside [0, 1]");
    }
    if stacks.is_empty() {
        bail!("no score-stack files given");
    }
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;

    let mut written = Vec::new();
    let mut failures = Vec::new();
    let mut seen_stems = std::collections::HashSet::new();
    for stack_path in stacks {
        let stem = stack_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("stack")
            .to_string();
        let fresh_stem = seen_stems.insert(stem.clone());
        let run = || -> anyhow::Result<PathBuf> {
            if !fresh_stem {
                bail!("duplicate output name {stem}.png");
            }
            let stack = read_score_stack(stack_path)?;
            let map = cam_to_label_map(&stack, bg_threshold)?;
            let out_path = out_dir.join(format!("{stem}.png"));
            write_label_png(&out_path, &map)?;
            Ok(out_path)
        };
        match run() {
            Ok(path) => written.push(path),
            Err(e) => failures.push(SkippedImage {
                id: stack_path.display().to_string(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(CamSummary { written, failures })
}

// ---------------------------------------------------------------------------
// masks-inspect
// ---------------------------------------------------------------------------

pub fn cmd_masks_inspect(path: &Path, filter: &QualityFilter) -> anyhow::Result<MaskIngest> {
    Ok(read_mask_records(path, filter)?)
}

pub fn render_inspect_human(path: &Path, ingest: &MaskIngest) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "{}: {} records", path.display(), ingest.records.len());
    let _ = writeln!(
        out,
        "{:<6} {:<10} {:>8} {:>9} {:>10} {:<22}",
        "record", "size", "area", "pred_iou", "stability", "status"
    );
    for record in &ingest.records {
        let status = serde_json::to_value(record.status).expect("status serializes");
        let _ = writeln!(
            out,
            "{:<6} {:<10} {:>8} {:>9.3} {:>10.3} {:<22}",
            record.index,
            format!("{}x{}", record.height, record.width),
            record.area,
            record.predicted_iou,
            record.stability_score,
            status.as_str().unwrap_or("?"),
        );
    }
    let _ = writeln!(
        out,
        "kept {} of {} ({} filtered, {} zero-area, {} polygon)",
        ingest.kept(),
        ingest.records.len(),
        ingest.count(crate::io::RecordStatus::DroppedPredictedIou)
            + ingest.count(crate::io::RecordStatus::DroppedStability),
        ingest.count(crate::io::RecordStatus::DroppedZeroArea),
        ingest.count(crate::io::RecordStatus::RejectedPolygon),
    );
    out
}

pub fn render_inspect_machine(ingest: &MaskIngest) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for record in &ingest.records {
        let mut value = serde_json::to_value(record).expect("record serializes");
        value["type"] = "record".into();
        let _ = writeln!(out, "{value}");
    }
    let summary = serde_json::json!({
        "type": "summary",
        "records": ingest.records.len(),
        "kept": ingest.kept(),
    });
    let _ = writeln!(out, "{summary}");
    out
}
