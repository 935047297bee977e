//! Run manifests: one JSON document per run carrying the config hash,
//! artifact version, wall clock, a parameter echo, and the output list.
//! Data files carry the hash in a `#` header line; the manifest alone
//! holds the wall clock, so data outputs stay byte-identical across
//! re-runs of the same config.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::RunConfig;
use crate::CliError;

pub fn config_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(24);
    for b in digest.iter().take(12) {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

#[derive(Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub experiment: String,
    pub seed: u64,
    pub trials: u64,
    pub wall_clock_ms: u128,
    pub parameters: RunConfig,
    pub outputs: Vec<String>,
}

pub struct ManifestBuilder {
    hash: String,
    config: RunConfig,
    started: Instant,
    outputs: Vec<String>,
    dir: PathBuf,
}

impl ManifestBuilder {
    pub fn new(config: &RunConfig, config_bytes: &[u8], dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Unwritable(format!("{}: {e}", dir.display())))?;
        // Probe writability up front.
        let probe = dir.join(".loclab-probe");
        std::fs::write(&probe, b"ok")
            .map_err(|e| CliError::Unwritable(format!("{}: {e}", dir.display())))?;
        let _ = std::fs::remove_file(&probe);
        Ok(ManifestBuilder {
            hash: config_hash(config_bytes),
            config: config.clone(),
            started: Instant::now(),
            outputs: Vec::new(),
            dir: dir.to_path_buf(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Deterministic header line for data files.
    pub fn data_header(&self) -> String {
        format!("# loclab {} config {}", env!("CARGO_PKG_VERSION"), self.hash)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Writes `manifest.json` exactly once, consuming the builder.
    pub fn finish(self) -> Result<(), CliError> {
        let manifest = RunManifest {
            config_hash: self.hash.clone(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: self.config.run.experiment.clone(),
            seed: self.config.run.seed,
            trials: self.config.run.trials,
            wall_clock_ms: self.started.elapsed().as_millis(),
            parameters: self.config,
            outputs: self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Invalid(format!("manifest encode: {e}")))?;
        std::fs::write(self.dir.join("manifest.json"), text)
            .map_err(|e| CliError::Unwritable(format!("manifest: {e}")))?;
        Ok(())
    }
}
