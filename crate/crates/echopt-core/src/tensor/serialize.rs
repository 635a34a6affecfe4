//! Checkpoint format: a flat little-endian f32 stream plus a JSON
//! manifest listing (name, shape, byte offset, learnable) per tensor.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset_bytes: u64,
    pub learnable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    /// Free-form model metadata (config, input scale, ...).
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

/// One named tensor headed for a checkpoint.
pub struct NamedTensor<'a> {
    pub name: &'a str,
    pub shape: &'a [usize],
    pub data: &'a [f64],
    pub learnable: bool,
}

/// Writes `<stem>.bin` (f32 LE stream) and `<stem>.json` (manifest).
pub fn write_checkpoint(
    stem: &Path,
    tensors: &[NamedTensor<'_>],
    meta: serde_json::Value,
) -> Result<()> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    let bin_path = stem.with_extension("bin");
    let mut bin = std::io::BufWriter::new(std::fs::File::create(&bin_path)?);
    for t in tensors {
        let count: usize = t.shape.iter().product();
        if count != t.data.len() {
            return Err(CoreError::ShapeMismatch {
                op: "write_checkpoint",
                lhs: vec![t.data.len()],
                rhs: t.shape.to_vec(),
            });
        }
        for &v in t.data {
            bin.write_all(&(v as f32).to_le_bytes())?;
        }
        entries.push(TensorEntry {
            name: t.name.to_string(),
            shape: t.shape.to_vec(),
            offset_bytes: offset,
            learnable: t.learnable,
        });
        offset += 4 * count as u64;
    }
    bin.flush()?;
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        meta,
        tensors: entries,
    };
    std::fs::write(
        stem.with_extension("json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Reads a checkpoint written by [`write_checkpoint`]. Returns the
/// manifest and one f64 buffer per tensor, in manifest order.
pub fn read_checkpoint(stem: &Path) -> Result<(CheckpointManifest, Vec<Vec<f64>>)> {
    let manifest: CheckpointManifest =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(CoreError::DataFormat(format!(
            "checkpoint version {} (expected {CHECKPOINT_VERSION})",
            manifest.format_version
        )));
    }
    let mut bin = Vec::new();
    std::fs::File::open(stem.with_extension("bin"))?.read_to_end(&mut bin)?;
    let mut out = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let count: usize = entry.shape.iter().product();
        let start = entry.offset_bytes as usize;
        let end = start + 4 * count;
        if end > bin.len() {
            return Err(CoreError::DataFormat(format!(
                "tensor {} overruns checkpoint payload",
                entry.name
            )));
        }
        let data: Vec<f64> = bin[start..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        out.push(data);
    }
    Ok((manifest, out))
}
