//! Score-stack files: a 12-byte little-endian header (`num_classes`,
//! `height`, `width` as u32) followed by `num_classes * height * width`
//! little-endian f32 activations in class-major, row-major order.

use std::path::Path;

use sepl_core::ScoreStack;

use crate::io::IoError;

const HEADER_LEN: usize = 12;

pub fn read_score_stack(path: &Path) -> Result<ScoreStack, IoError> {
    let corrupt = |reason: String| IoError::CorruptScoreStack {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = std::fs::read(path).map_err(|source| IoError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!(
            "file holds {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap());
    let num_classes = word(0);
    let height = word(1);
    let width = word(2);
    if num_classes > 254 {
        return Err(corrupt(format!(
            "{num_classes} classes exceed the 8-bit label range"
        )));
    }
    if height == 0 || width == 0 {
        return Err(corrupt(format!("empty raster dimensions {height}x{width}")));
    }
    let expected = num_classes as u64 * height as u64 * width as u64;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != expected * 4 {
        return Err(corrupt(format!(
            "header promises {expected} scores ({} bytes) but {} payload bytes follow",
            expected * 4,
            payload.len()
        )));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScoreStack::new(num_classes as u16, height, width, values).map_err(|e| corrupt(e.to_string()))
}

pub fn write_score_stack(path: &Path, stack: &ScoreStack) -> Result<(), IoError> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + std::mem::size_of_val(stack.values()));
    bytes.extend_from_slice(&(stack.num_classes() as u32).to_le_bytes());
    bytes.extend_from_slice(&stack.height().to_le_bytes());
    bytes.extend_from_slice(&stack.width().to_le_bytes());
    for value in stack.values() {
        bytes.extend_from_slice(&value.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|source| IoError::WriteFailure {
        path: path.to_path_buf(),
        source,
    })
}
