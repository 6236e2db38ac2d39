//! Run manifest: what a command produced and from which inputs, so a rerun
//! can be checked byte-for-byte. CSV outputs are hashed; the manifest itself
//! is the only file whose bytes may differ between reruns (timings).

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct TimingEntry {
    pub label: String,
    pub millis: u128,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub scenario_hash: String,
    pub base_seed: u64,
    pub outputs: Vec<OutputEntry>,
    pub timings: Vec<TimingEntry>,
}

impl RunManifest {
    pub fn record_output(&mut self, path: &Path) -> std::io::Result<()> {
        let data = std::fs::read(path)?;
        let mut hasher = Sha256::new();
        hasher.update(&data);
        let sha256: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        self.outputs.push(OutputEntry {
            file: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            bytes: data.len() as u64,
            sha256,
        });
        Ok(())
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
