use std::path::Path;

use cqed_core::model::{cooperativity, CoupledSystem, RateSet};
use cqed_core::scattering::DriveGrid;
use cqed_core::spectra::{counts_per_point, dit_intensity, sample_counts, DitModel, GeneratingModel, Sidecar};
use serde_json::json;

use super::Artifacts;
use crate::config::SpectrumConfig;
use crate::{CliError, Outputs};

/// The DIT model described by a spectrum config, with a unit-scale
/// envelope unless the config overrides it.
pub fn model_from(cfg: &SpectrumConfig) -> Result<DitModel, CliError> {
    let rates: RateSet = cfg.rates.into();
    Ok(DitModel {
        sys: CoupledSystem::new(rates, cfg.temperature_k)?,
        geometry: cfg.geometry,
        bg_ratio: cfg.background_ratio,
        fp: cfg.fabry_perot,
        thermal: cfg.thermal,
    })
}

pub fn run(cfg: &SpectrumConfig, seed: u64, _base: &Path, out: &Path) -> Result<Outputs, CliError> {
    let model = model_from(cfg)?;
    let grid = DriveGrid::linspace(cfg.detuning_start_hz, cfg.detuning_stop_hz, cfg.points)?;
    let y = dit_intensity(&model, &grid)?;
    let f_cav = model.sys.rates.f_cav;
    let d = grid.detunings();

    let mut art = Artifacts::new(out);
    art.csv(
        "spectrum.csv",
        &["detuning_hz", "frequency_hz", "intensity"],
        d.iter().zip(&y).map(|(&d, &v)| vec![d, f_cav + d, v]),
    )?;

    let (i_min, y_min) = y
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| CliError::Config("spectrum has no points".into()))?;
    let mut summary = json!({
        "points": y.len(),
        "cooperativity": cooperativity(&model.sys.rates).ok(),
        "bright_population": model.sys.bright_population(),
        "min_intensity": y_min,
        "min_detuning_hz": d[i_min],
    });

    if let Some(noise) = cfg.noise {
        // Intensity is normalized, so the envelope is rescaled to counts.
        let scale = counts_per_point(noise.peak_rate_cps, noise.exposure_s);
        let counted = DitModel { fp: model.fp.map(|c| c * scale), ..model };
        let expected: Vec<f64> = y.iter().map(|v| v * scale).collect();
        let freqs: Vec<f64> = d.iter().map(|x| f_cav + x).collect();
        let sampled = sample_counts(&freqs, &expected, noise.exposure_s, seed)?;
        sampled.save_csv(&art.path("sample.csv"))?;
        Sidecar { generator: GeneratingModel::Dit { model: counted, f_ref_hz: f_cav }, seed: Some(seed) }
            .save(&art.path("sample.json"))?;
        summary["total_counts"] = json!(sampled.counts.iter().sum::<u64>());
    }
    Ok(Outputs { files: art.files, summary })
}
