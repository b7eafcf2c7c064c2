//! Batch front end: one JSON config in, CSV/JSON artifacts and a `run.json`
//! manifest out.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

pub use error::CliError;
pub use manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    /// Model and optionally Poisson-sampled DIT spectra.
    Spectrum,
    /// Broadband and DIT fits of spectrum CSVs, with pooling.
    Fit,
    /// Telegraph simulation, threshold readout and T1 estimation.
    Readout,
    /// LIPO + trust-region design search.
    Optimize,
    /// Mount calibration and external-magnet alignment maps.
    Magnet,
    /// Cavity Q and loss-rate budget.
    Budget,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "cqed", version, about = "Cavity-QED spin-photon interface toolkit")]
pub struct Cli {
    pub verb: Verb,
    /// JSON config document.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "cqed-out")]
    pub out: PathBuf,
}

/// Files written by a command and its summary for the manifest.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

/// Runs one command and always writes `run.json` into the output directory
/// when that directory can be created.
pub fn run(cli: &Cli) -> (Manifest, Result<(), CliError>) {
    let mut manifest = Manifest::start(cli);
    let result = std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cli.out.display())))
        .and_then(|_| dispatch(cli, &mut manifest));
    manifest.finish(&result);
    if cli.out.is_dir() {
        if let Err(e) = manifest.write(&cli.out) {
            eprintln!("warning: could not write manifest: {e}");
        }
    }
    (manifest, result)
}

fn dispatch(cli: &Cli, manifest: &mut Manifest) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", cli.config.display())))?;
    let base = cli.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = &cli.out;
    macro_rules! go {
        ($ty:ty, $cmd:path) => {{
            let cfg: $ty = config::parse(&text)?;
            let seed = cli.seed.or(cfg.seed).unwrap_or(0);
            manifest.seed = seed;
            manifest.config = serde_json::to_value(&cfg).ok();
            $cmd(&cfg, seed, &base, out)
        }};
    }
    let outputs = match cli.verb {
        Verb::Spectrum => go!(config::SpectrumConfig, commands::spectrum::run),
        Verb::Fit => go!(config::FitConfig, commands::fit::run),
        Verb::Readout => go!(config::ReadoutConfig, commands::readout::run),
        Verb::Optimize => go!(config::OptimizeConfig, commands::optimize::run),
        Verb::Magnet => go!(config::MagnetConfig, commands::magnet::run),
        Verb::Budget => go!(config::BudgetConfig, commands::budget::run),
    }?;
    manifest.outputs = outputs.files;
    manifest.summary = outputs.summary;
    Ok(())
}
