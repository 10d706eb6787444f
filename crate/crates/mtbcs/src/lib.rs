//! Configuration, file formats and experiment commands around `mtbcs-core`.

use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod formats;
pub mod manifest;

pub use mtbcs_core as core;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] mtbcs_core::Error),
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed file {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("missing input files:\n  {}", .0.join("\n  "))]
    MissingFiles(Vec<String>),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(mtbcs_core::Error::RadargramMismatch(_)) => 4,
            AppError::Numerical(_) => 3,
            AppError::Io { .. } | AppError::Format { .. } | AppError::MissingFiles(_) => 4,
        }
    }
}

/// Wall clock for timing inversions.
pub struct WallClock(std::time::Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(std::time::Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl mtbcs_core::invert::Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
