//! One module per CLI verb. Every command is a pure function of its config
//! and seed; wall-clock data lives only in the manifest.

pub mod budget;
pub mod fit;
pub mod magnet;
pub mod optimize;
pub mod readout;
pub mod spectrum;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Collects written artifacts by file name.
#[derive(Debug, Default)]
pub(crate) struct Artifacts {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(self.path(name), text)?;
        Ok(())
    }

    /// CSV with a header row; floats use shortest round-trip formatting.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Resolves a config-relative path.
pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
