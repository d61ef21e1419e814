//! Library side of the `adam-regret` command: config loading and the
//! `run`, `race`, `fuzz` and `replay` commands. Every command computes all
//! of its results first and writes files only at the end.

pub mod config;
pub mod error;
pub mod fuzz;
pub mod race;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{OptimizerKind, RunConfig};
pub use error::{CliError, CliResult, EXIT_VIOLATION};

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "ADAM_REGRET_THREADS";

/// File contents collected before anything is written.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, relative: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((relative.into(), bytes));
    }

    /// Writes every file under `dir`, creating directories as needed.
    pub fn write_all(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
