use std::collections::BTreeMap;
use std::path::Path;

use cqed_core::fitting::{
    default_reject, fit_broadband, fit_dit, guess_broadband, pool, write_batch_csv, DitFixed, FitError, FitResult,
    PooledEstimate, ScanEstimate,
};
use cqed_core::model::{CoupledSystem, RateSet};
use cqed_core::spectra::{DitModel, SampledSpectrum};
use serde::Serialize;
use serde_json::json;

use super::{resolve, Artifacts};
use crate::config::{FitConfig, FitModel};
use crate::{CliError, Outputs};

/// Delta_e only enters thermal models, which are never fitted here.
const FIT_TEMPERATURE_K: f64 = 4.0;
const FIT_DELTA_E_HZ: f64 = 50e9;

#[derive(Debug, Serialize)]
struct ScanReport {
    input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct PoolReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<PooledEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn load(base: &Path, p: &Path) -> Result<SampledSpectrum, CliError> {
    let path = resolve(base, p);
    SampledSpectrum::load_csv(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn broadband(spec: &SampledSpectrum, baseline: Option<f64>) -> Result<FitResult, FitError> {
    fit_broadband(spec, &guess_broadband(spec, baseline)?)
}

/// Cavity quantities fixed for the DIT stage, from a broadband fit or the
/// config.
fn dit_fixed(cfg: &FitConfig, base: &Path) -> Result<(DitFixed, Option<FitResult>), CliError> {
    if let Some(p) = &cfg.broadband_input {
        let spec = load(base, p)?;
        let r = broadband(&spec, cfg.baseline_counts)?;
        let v = |n: &str| r.value(n).expect("broadband parameter");
        let a = v("a");
        let fixed = DitFixed { f_cav: v("f0"), kappa: v("kappa"), bg_ratio: [v("b0") / a, v("b1") / a, v("b2") / a] };
        return Ok((fixed, Some(r)));
    }
    let c = cfg
        .cavity
        .ok_or_else(|| CliError::Config("dit fits need `cavity` or `broadband_input`".into()))?;
    Ok((DitFixed { f_cav: c.f_cav_hz, kappa: c.kappa_hz, bg_ratio: c.background_ratio }, None))
}

/// DIT starting point; the envelope scale matches the mean counts.
fn dit_init(cfg: &FitConfig, fixed: &DitFixed, spec: &SampledSpectrum) -> Result<DitModel, CliError> {
    let e = cfg.emitter.ok_or_else(|| CliError::Config("dit fits need an `emitter` guess".into()))?;
    let kappa_i = cfg.kappa_i_fraction * fixed.kappa;
    let rates = RateSet {
        f_cav: fixed.f_cav,
        f_emitter: fixed.f_cav + e.detuning_hz,
        kappa_i,
        kappa_c: (fixed.kappa - kappa_i) / 2.0,
        gamma: e.gamma_hz,
        gamma_d: 0.0,
        g: e.g_hz,
        delta_e: FIT_DELTA_E_HZ,
    };
    let unit = DitModel {
        sys: CoupledSystem::new(rates, FIT_TEMPERATURE_K)?,
        geometry: cfg.geometry,
        bg_ratio: fixed.bg_ratio,
        fp: [1.0, 0.0, 0.0],
        thermal: false,
    };
    let d = spec.detunings(fixed.f_cav);
    let shape: f64 = d.iter().map(|&x| unit.eval(x)).sum();
    let counts: f64 = spec.counts.iter().map(|&c| c as f64).sum();
    let scale = if shape > 0.0 && counts > 0.0 { counts / shape } else { 1.0 };
    Ok(DitModel { fp: [scale, 0.0, 0.0], ..unit })
}

pub fn run(cfg: &FitConfig, _seed: u64, base: &Path, out: &Path) -> Result<Outputs, CliError> {
    if cfg.inputs.is_empty() {
        return Err(CliError::Config("`inputs` is empty".into()));
    }
    // Every input must load before any fitting starts.
    let spectra = cfg.inputs.iter().map(|p| load(base, p)).collect::<Result<Vec<_>, _>>()?;

    let (fixed, stage) = match cfg.model {
        FitModel::Broadband => (None, None),
        FitModel::Dit => {
            let (f, s) = dit_fixed(cfg, base)?;
            (Some(f), s)
        }
    };
    let mut scans = Vec::with_capacity(spectra.len());
    for (p, spec) in cfg.inputs.iter().zip(&spectra) {
        let r = match &fixed {
            None => broadband(spec, cfg.baseline_counts),
            Some(f) => fit_dit(spec, f, &dit_init(cfg, f, spec)?),
        };
        let input = p.display().to_string();
        scans.push(match r {
            Ok(fit) => ScanReport { input, fit: Some(fit), error: None },
            Err(e) => ScanReport { input, fit: None, error: Some(e.to_string()) },
        });
    }
    let ok: Vec<FitResult> = scans.iter().filter_map(|s| s.fit.clone()).collect();
    if ok.is_empty() {
        let first = scans.iter().find_map(|s| s.error.clone()).unwrap_or_default();
        return Err(CliError::Numerical(format!("every fit failed; first error: {first}")));
    }

    let default_pool = match cfg.model {
        FitModel::Broadband => "q",
        FitModel::Dit => "cooperativity",
    };
    let names = cfg.pool.clone().unwrap_or_else(|| vec![default_pool.to_string()]);
    let mut pooled = BTreeMap::new();
    for name in names {
        let est: Vec<ScanEstimate> = ok.iter().filter_map(|f| f.estimate(&name)).collect();
        let report = if est.is_empty() {
            PoolReport { estimate: None, error: Some(format!("no fit reports `{name}`")) }
        } else {
            match pool(&est, default_reject) {
                Ok(p) => PoolReport { estimate: Some(p), error: None },
                Err(e) => PoolReport { estimate: None, error: Some(e.to_string()) },
            }
        };
        pooled.insert(name, report);
    }

    let mut art = Artifacts::new(out);
    let n_failed = scans.len() - ok.len();
    let report = json!({
        "model": cfg.model,
        "cavity_stage": stage,
        "fixed": fixed,
        "scans": scans,
        "pooled": pooled,
    });
    art.json("fits.json", &report)?;
    write_batch_csv(&ok, std::fs::File::create(art.path("fits.csv"))?)?;
    let summary = json!({ "n_inputs": scans.len(), "n_failed": n_failed, "pooled": pooled });
    Ok(Outputs { files: art.files, summary })
}
