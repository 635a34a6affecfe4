//! Run manifests: every output directory records the exact command
//! line, seeds, effective config hash, and tool version needed to
//! reproduce its contents.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub seeds: Vec<u64>,
    pub config_hash: String,
    pub version: String,
}

pub fn write_manifest(
    out_dir: &Path,
    seeds: &[u64],
    effective_config: &impl Serialize,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let config_json =
        serde_json::to_vec(effective_config).context("serializing effective config")?;
    let manifest = RunManifest {
        command_line: std::env::args().collect(),
        seeds: seeds.to_vec(),
        config_hash: echopt_core::dataset::fnv1a_hex(&config_json),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    // The effective config itself makes the directory self-describing.
    std::fs::write(out_dir.join("config.json"), config_json)?;
    Ok(())
}
