use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::formats::write_atomic;
use crate::AppError;

/// Record of one command run, written even when the command fails.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: Option<PathBuf>,
    /// SHA-256 of the configuration file bytes.
    pub config_hash: Option<String>,
    pub scenario_fingerprint: Option<String>,
    pub workers: usize,
    pub seed_override: Option<u64>,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub outputs: Vec<PathBuf>,
    /// Seconds per named stage.
    pub timings: BTreeMap<String, f64>,
    pub warnings: BTreeMap<String, u64>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, workers: usize, seed_override: Option<u64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_path: None,
            config_hash: None,
            scenario_fingerprint: None,
            workers,
            seed_override,
            status: "running".into(),
            exit_code: 0,
            error: None,
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            warnings: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn hash_config(&mut self, path: &Path, bytes: &[u8]) {
        self.config_path = Some(path.to_path_buf());
        self.config_hash = Some(hex(&Sha256::digest(bytes)));
    }

    pub fn warn(&mut self, key: &str, count: u64) {
        if count > 0 {
            *self.warnings.entry(key.into()).or_default() += count;
        }
    }

    pub fn finish(&mut self, result: &Result<(), AppError>) {
        match result {
            Ok(()) => {
                self.status = "ok".into();
                self.exit_code = 0;
            }
            Err(e) => {
                self.status = "error".into();
                self.exit_code = e.exit_code();
                self.error = Some(e.to_string());
            }
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, AppError> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
