//! Dataset ingestion and emission: label-map PNGs, mask-record files, and
//! line-delimited manifests.
//!
//! File formats:
//! - label maps: 8-bit PNG (grayscale or palette), pixel value = class id,
//!   255 = ignore. Written as palette PNGs with the standard VOC-style
//!   colormap so any image viewer shows distinct class colors.
//! - mask records: a JSON list of objects with keys `segmentation`
//!   (`{size: [H, W], counts: <compressed RLE>}`), `area`, `bbox`
//!   (`[x, y, w, h]`), `predicted_iou`, `stability_score` — the layout
//!   automatic mask generators dump, so real outputs load unmodified.
//!   Polygon segmentations are rejected per record.
//! - manifest: line-delimited JSON; the first line is a header
//!   `{"num_classes": K, "class_names": [...]}` and each following line is
//!   `{"id", "pseudo", "masks", "gt"?}` with paths relative to the manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sepl_core::{decode_rle, encode_rle, BinaryMask, LabelMap, RleError, RleMask, IGNORE_LABEL};

/// Ingestion drops mask records below these generator-confidence scores
/// unless filtering is disabled.
pub const DEFAULT_MIN_PREDICTED_IOU: f64 = 0.86;
pub const DEFAULT_MIN_STABILITY: f64 = 0.92;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    WriteFailure {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: png decode failed: {source}")]
    PngDecode {
        path: PathBuf,
        source: png::DecodingError,
    },
    #[error("{path}: png encode failed: {source}")]
    PngEncode {
        path: PathBuf,
        source: png::EncodingError,
    },
    #[error("{path}: unsupported png layout {color_type:?} at {bit_depth:?} bits; need 8-bit grayscale or palette")]
    UnsupportedPngDepth {
        path: PathBuf,
        color_type: png::ColorType,
        bit_depth: png::BitDepth,
    },
    #[error("{path}: label value {value} exceeds class count {num_classes} and is not ignore")]
    ClassOutOfRange {
        path: PathBuf,
        value: u8,
        num_classes: u8,
    },
    #[error("{path}: malformed json: {source}")]
    MalformedJson {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: record {index}: {reason}")]
    MalformedRecord {
        path: PathBuf,
        index: usize,
        reason: String,
    },
    #[error("{path}: record {index}: malformed rle: {source}")]
    MalformedRle {
        path: PathBuf,
        index: usize,
        source: RleError,
    },
    #[error("{path}: record {index}: stated area {stated} differs from decoded area {decoded}")]
    AreaMismatch {
        path: PathBuf,
        index: usize,
        stated: u64,
        decoded: u64,
    },
    #[error("{path}: manifest: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },
    #[error("{path}: score stack: {reason}")]
    CorruptScoreStack { path: PathBuf, reason: String },
}

fn read_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    }
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::WriteFailure {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Label-map PNGs
// ---------------------------------------------------------------------------

/// The VOC-style palette: entry `i` derives its RGB bits from the bits of
/// `i`, giving visually distinct colors for small class ids and the familiar
/// light gray for the ignore index.
pub fn voc_palette() -> Vec<u8> {
    let mut palette = vec![0u8; 768];
    for i in 0..256usize {
        let (mut r, mut g, mut b) = (0u8, 0u8, 0u8);
        let mut id = i;
        for shift in 0..8 {
            r |= ((id & 1) as u8) << (7 - shift);
            g |= (((id >> 1) & 1) as u8) << (7 - shift);
            b |= (((id >> 2) & 1) as u8) << (7 - shift);
            id >>= 3;
        }
        palette[i * 3] = r;
        palette[i * 3 + 1] = g;
        palette[i * 3 + 2] = b;
    }
    palette
}

/// Reads an 8-bit grayscale or palette PNG as a label map, validating every
/// value against the dataset class count (255 stays legal as ignore).
pub fn read_label_png(path: &Path, num_classes: u8) -> Result<LabelMap, IoError> {
    let file = File::open(path).map_err(read_err(path))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|source| IoError::PngDecode {
        path: path.to_path_buf(),
        source,
    })?;
    let buf_len = reader
        .output_buffer_size()
        .ok_or_else(|| IoError::PngDecode {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "image dimensions overflow the output buffer",
            )
            .into(),
        })?;
    let mut buf = vec![0u8; buf_len];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|source| IoError::PngDecode {
            path: path.to_path_buf(),
            source,
        })?;
    if frame.bit_depth != png::BitDepth::Eight
        || !matches!(
            frame.color_type,
            png::ColorType::Grayscale | png::ColorType::Indexed
        )
    {
        return Err(IoError::UnsupportedPngDepth {
            path: path.to_path_buf(),
            color_type: frame.color_type,
            bit_depth: frame.bit_depth,
        });
    }
    buf.truncate(frame.buffer_size());
    for &value in &buf {
        if value > num_classes && value != IGNORE_LABEL {
            return Err(IoError::ClassOutOfRange {
                path: path.to_path_buf(),
                value,
                num_classes,
            });
        }
    }
    Ok(LabelMap::from_raw(frame.height, frame.width, buf))
}

/// Writes a label map as an 8-bit palette PNG with the VOC-style colormap.
pub fn write_label_png(path: &Path, map: &LabelMap) -> Result<(), IoError> {
    let encode_err = |source| IoError::PngEncode {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(write_err(path))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), map.width(), map.height());
    encoder.set_color(png::ColorType::Indexed);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_palette(voc_palette());
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(map.data()).map_err(encode_err)?;
    writer.finish().map_err(encode_err)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Mask records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segmentation {
    /// `[height, width]`
    pub size: [u32; 2],
    pub counts: String,
}

/// One generator mask with its metadata, as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskRecord {
    pub segmentation: Segmentation,
    pub area: u64,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    pub predicted_iou: f64,
    pub stability_score: f64,
}

/// Ingestion-time quality gate on generator confidence scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityFilter {
    pub enabled: bool,
    pub min_predicted_iou: f64,
    pub min_stability: f64,
}

impl Default for QualityFilter {
    fn default() -> Self {
        Self {
            enabled: true,
            min_predicted_iou: DEFAULT_MIN_PREDICTED_IOU,
            min_stability: DEFAULT_MIN_STABILITY,
        }
    }
}

impl QualityFilter {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn keeps(&self, predicted_iou: f64, stability_score: f64) -> bool {
        !self.enabled
            || (predicted_iou >= self.min_predicted_iou && stability_score >= self.min_stability)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Kept,
    DroppedPredictedIou,
    DroppedStability,
    DroppedZeroArea,
    RejectedPolygon,
}

/// Per-record ingestion diagnostics, in file order.
#[derive(Debug, Clone, Serialize)]
pub struct RecordInfo {
    pub index: usize,
    pub height: u32,
    pub width: u32,
    pub area: u64,
    pub bbox: [f64; 4],
    pub predicted_iou: f64,
    pub stability_score: f64,
    pub status: RecordStatus,
}

/// Result of ingesting one mask-record file: the surviving masks in
/// area-descending order, the file index each came from, and per-record
/// diagnostics.
#[derive(Debug, Clone)]
pub struct MaskIngest {
    pub masks: Vec<BinaryMask>,
    /// `masks[i]` decodes record `source_records[i]`.
    pub source_records: Vec<usize>,
    pub records: Vec<RecordInfo>,
}

impl MaskIngest {
    pub fn kept(&self) -> usize {
        self.masks.len()
    }

    pub fn count(&self, status: RecordStatus) -> usize {
        self.records.iter().filter(|r| r.status == status).count()
    }
}

/// Reads a mask-record file, decodes each RLE, enforces the stated-area
/// invariant, drops zero-area masks and (when the filter is enabled) records
/// below the confidence thresholds, and returns survivors area-descending.
///
/// Polygon-segmentation records are rejected per record and reported in the
/// diagnostics; structural corruption (bad JSON, an undecodable RLE, an area
/// mismatch) fails the whole file.
pub fn read_mask_records(path: &Path, filter: &QualityFilter) -> Result<MaskIngest, IoError> {
    let file = File::open(path).map_err(read_err(path))?;
    let raw: Vec<serde_json::Value> =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::MalformedJson {
            path: path.to_path_buf(),
            source,
        })?;

    let mut records = Vec::with_capacity(raw.len());
    let mut kept: Vec<(usize, BinaryMask)> = Vec::new();
    for (index, value) in raw.into_iter().enumerate() {
        let malformed = |reason: String| IoError::MalformedRecord {
            path: path.to_path_buf(),
            index,
            reason,
        };
        let segmentation = value
            .get("segmentation")
            .ok_or_else(|| malformed("missing segmentation".into()))?;
        if segmentation.is_array() || segmentation.get("counts").is_some_and(|c| c.is_array()) {
            // polygon or uncompressed-RLE segmentation: reject the record,
            // keep the file
            records.push(RecordInfo {
                index,
                height: 0,
                width: 0,
                area: 0,
                bbox: [0.0; 4],
                predicted_iou: 0.0,
                stability_score: 0.0,
                status: RecordStatus::RejectedPolygon,
            });
            continue;
        }
        let record: MaskRecord =
            serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        let [height, width] = record.segmentation.size;

        if !record.predicted_iou.is_finite() || record.predicted_iou < 0.0 {
            return Err(malformed(format!(
                "predicted_iou {} is not a nonnegative number",
                record.predicted_iou
            )));
        }
        if !record.stability_score.is_finite() || !(0.0..=1.0).contains(&record.stability_score) {
            return Err(malformed(format!(
                "stability_score {} is outside [0, 1]",
                record.stability_score
            )));
        }
        let [bx, by, bw, bh] = record.bbox;
        if !(bx >= 0.0
            && by >= 0.0
            && bw >= 0.0
            && bh >= 0.0
            && bx + bw <= width as f64
            && by + bh <= height as f64)
        {
            return Err(malformed(format!(
                "bbox {:?} falls outside the {}x{} image",
                record.bbox, height, width
            )));
        }

        let rle = RleMask {
            height,
            width,
            counts: record.segmentation.counts.clone(),
        };
        let mask = decode_rle(&rle).map_err(|source| IoError::MalformedRle {
            path: path.to_path_buf(),
            index,
            source,
        })?;
        if mask.area() != record.area {
            return Err(IoError::AreaMismatch {
                path: path.to_path_buf(),
                index,
                stated: record.area,
                decoded: mask.area(),
            });
        }

        let status = if mask.area() == 0 {
            RecordStatus::DroppedZeroArea
        } else if filter.enabled && record.predicted_iou < filter.min_predicted_iou {
            RecordStatus::DroppedPredictedIou
        } else if filter.enabled && record.stability_score < filter.min_stability {
            RecordStatus::DroppedStability
        } else {
            RecordStatus::Kept
        };
        records.push(RecordInfo {
            index,
            height,
            width,
            area: mask.area(),
            bbox: record.bbox,
            predicted_iou: record.predicted_iou,
            stability_score: record.stability_score,
            status,
        });
        if status == RecordStatus::Kept {
            kept.push((index, mask));
        }
    }

    // area-descending, stable on file order
    kept.sort_by(|a, b| b.1.area().cmp(&a.1.area()).then(a.0.cmp(&b.0)));
    let (source_records, masks) = kept.into_iter().unzip();
    Ok(MaskIngest {
        masks,
        source_records,
        records,
    })
}

/// Serializes masks as a mask-record file. Synthetic masks get perfect
/// confidence scores; the bbox is computed from the raster.
pub fn write_mask_records(path: &Path, masks: &[BinaryMask]) -> Result<(), IoError> {
    let records: Vec<MaskRecord> = masks
        .iter()
        .filter(|m| m.area() > 0)
        .map(|mask| {
            let rle = encode_rle(mask);
            MaskRecord {
                segmentation: Segmentation {
                    size: [rle.height, rle.width],
                    counts: rle.counts,
                },
                area: mask.area(),
                bbox: mask_bbox(mask),
                predicted_iou: 1.0,
                stability_score: 1.0,
            }
        })
        .collect();
    let file = File::create(path).map_err(write_err(path))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer(&mut writer, &records).map_err(|source| IoError::MalformedJson {
        path: path.to_path_buf(),
        source,
    })?;
    writer.write_all(b"\n").map_err(write_err(path))?;
    Ok(())
}

fn mask_bbox(mask: &BinaryMask) -> [f64; 4] {
    let mut bbox: Option<(u32, u32, u32, u32)> = None;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let (x0, y0, x1, y1) = bbox.unwrap_or((x, y, x, y));
                bbox = Some((x0.min(x), y0.min(y), x1.max(x), y1.max(y)));
            }
        }
    }
    match bbox {
        Some((x0, y0, x1, y1)) => [
            x0 as f64,
            y0 as f64,
            (x1 - x0 + 1) as f64,
            (y1 - y0 + 1) as f64,
        ],
        None => [0.0; 4],
    }
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestHeader {
    num_classes: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_names: Option<Vec<String>>,
}

/// One dataset image: its id and the files that describe it. Paths are
/// stored as written in the manifest and resolved against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub pseudo: String,
    pub masks: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub num_classes: u8,
    pub class_names: Option<Vec<String>>,
    pub entries: Vec<ManifestEntry>,
    root: PathBuf,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self, IoError> {
        let malformed = |reason: String| IoError::MalformedManifest {
            path: path.to_path_buf(),
            reason,
        };
        let file = File::open(path).map_err(read_err(path))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = loop {
            match lines.next() {
                Some(line) => {
                    let line = line.map_err(read_err(path))?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
                None => return Err(malformed("empty manifest".into())),
            }
        };
        let header: ManifestHeader = serde_json::from_str(&header_line)
            .map_err(|e| malformed(format!("header line: {e}")))?;
        if header.num_classes == 0 || header.num_classes == IGNORE_LABEL {
            return Err(malformed(format!(
                "num_classes {} outside 1..=254",
                header.num_classes
            )));
        }
        if let Some(names) = &header.class_names {
            if names.len() != header.num_classes as usize + 1 {
                return Err(malformed(format!(
                    "class_names length {} must be num_classes + 1 = {} (background included)",
                    names.len(),
                    header.num_classes as usize + 1
                )));
            }
        }

        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(read_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line)
                .map_err(|e| malformed(format!("line {}: {e}", lineno + 2)))?;
            if !seen.insert(entry.id.clone()) {
                return Err(malformed(format!("duplicate image id {:?}", entry.id)));
            }
            entries.push(entry);
        }
        Ok(Self {
            num_classes: header.num_classes,
            class_names: header.class_names,
            entries,
            root: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        })
    }

    pub fn write(
        path: &Path,
        num_classes: u8,
        class_names: Option<&[String]>,
        entries: &[ManifestEntry],
    ) -> Result<(), IoError> {
        let file = File::create(path).map_err(write_err(path))?;
        let mut writer = BufWriter::new(file);
        let to_json_err = |source| IoError::MalformedJson {
            path: path.to_path_buf(),
            source,
        };
        let header = ManifestHeader {
            num_classes,
            class_names: class_names.map(<[String]>::to_vec),
        };
        serde_json::to_writer(&mut writer, &header).map_err(to_json_err)?;
        writer.write_all(b"\n").map_err(write_err(path))?;
        for entry in entries {
            serde_json::to_writer(&mut writer, entry).map_err(to_json_err)?;
            writer.write_all(b"\n").map_err(write_err(path))?;
        }
        writer.flush().map_err(write_err(path))?;
        Ok(())
    }

    /// Resolves a manifest-relative path.
    pub fn resolve(&self, relative: &str) -> PathBuf {
        let p = Path::new(relative);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }
}
