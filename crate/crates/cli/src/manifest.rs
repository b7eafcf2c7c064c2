use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::{Cli, CliError, Verb};

/// Contents of `run.json`. Timestamps live only here so that every other
/// artifact is byte-identical across reruns.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: Verb,
    pub version: &'static str,
    pub config_path: String,
    /// The parsed config with defaults filled in.
    pub config: Option<serde_json::Value>,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
    pub status: &'static str,
    pub exit_code: i32,
    pub error: Option<String>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl Manifest {
    pub fn start(cli: &Cli) -> Self {
        Self {
            command: cli.verb,
            version: env!("CARGO_PKG_VERSION"),
            config_path: cli.config.display().to_string(),
            config: None,
            seed: cli.seed.unwrap_or(0),
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
            status: "running",
            exit_code: 0,
            error: None,
            started_unix_s: now(),
            finished_unix_s: 0.0,
        }
    }

    pub fn finish(&mut self, result: &Result<(), CliError>) {
        self.finished_unix_s = now();
        match result {
            Ok(()) => {
                self.status = "ok";
                self.exit_code = 0;
            }
            Err(e) => {
                self.status = "error";
                self.exit_code = e.exit_code();
                self.error = Some(e.to_string());
            }
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("run.json"), text + "\n")
    }
}
