//! One JSON manifest per run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::Result;

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of every file under `root` (relative path and contents), skipping manifests.
pub fn tree_hash(root: &Path) -> Result<String> {
    let mut h = Sha256::new();
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| !p.to_string_lossy().ends_with(MANIFEST_SUFFIX))
        .collect();
    files.sort();
    for f in files {
        let rel = f.strip_prefix(root).unwrap_or(&f);
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(std::fs::read(&f)?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub dataset_hash: Option<String>,
    pub outputs: Vec<PathBuf>,
    started: Instant,
}

impl RunManifest {
    pub fn start(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            seed,
            dataset_hash: None,
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "dataset_hash": self.dataset_hash,
            "code_version": env!("CARGO_PKG_VERSION"),
            "wall_clock_s": self.started.elapsed().as_secs_f64(),
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        })
    }

    /// Writes the manifest to `path` atomically.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json()).expect("manifest serializes");
        edei_core::io::write_atomic(path, text.as_bytes())?;
        Ok(())
    }
}

/// Manifest location for a run that produces the file `out`.
pub fn beside(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(MANIFEST_SUFFIX);
    PathBuf::from(s)
}
