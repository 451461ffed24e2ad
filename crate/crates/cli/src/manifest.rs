//! Run manifest written next to every command's outputs.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    pub version: String,
    pub input_hash: String,
}

/// SHA-256 over the raw input file bytes followed by the resolved arguments.
pub fn input_hash(input: &[u8], args: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(input);
    h.update([0u8]);
    h.update(args.to_string().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write(dir: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("manifest.json"), text + "\n")
}
