//! Run manifests written next to every artifact.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use shaftpower::format::sha256_hex;

use crate::error::Result;
use crate::output::write_json;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the canonical JSON of the effective configuration.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

pub struct ManifestBuilder {
    command: String,
    started: Instant,
    config_hash: String,
    seeds: Vec<u64>,
    inputs: Vec<String>,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            started: Instant::now(),
            config_hash: sha256_hex(b"null"),
            seeds: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn config<T: Serialize>(mut self, config: &T) -> Self {
        let json = serde_json::to_vec(config).expect("configs serialize");
        self.config_hash = sha256_hex(&json);
        self
    }

    pub fn seeds(mut self, seeds: impl IntoIterator<Item = u64>) -> Self {
        self.seeds = seeds.into_iter().collect();
        self
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    /// Writes the manifest to `path`, listing `outputs`.
    pub fn write(self, path: &Path, outputs: &[PathBuf]) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config_hash,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: outputs
                .iter()
                .filter(|p| p.as_path() != path)
                .map(|p| p.display().to_string())
                .collect(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_json(path, &manifest)
    }
}

/// `<path>.manifest.json`
pub fn beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}
