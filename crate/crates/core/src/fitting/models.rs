//! The fit families: broadband cavity peak, dipole-induced transparency,
//! linewidth versus detuning, and single/double exponential recovery.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{minimize, LmOptions, Problem};
use super::{FitError, FitResult, Result};
use crate::model::RateSet;
use crate::spectra::{BroadbandModel, DitModel, SampledSpectrum, DEFAULT_BASELINE_COUNTS};

const BROADBAND_PARAMS: [&str; 6] = ["a", "f0", "kappa", "b0", "b1", "b2"];
/// Free parameters of the DIT fit, in covariance order.
pub const DIT_PARAMS: [&str; 6] = ["g", "gamma", "delta", "fp0", "fp1", "fp2"];
const LINESHAPE_PARAMS: [&str; 2] = ["gamma", "gamma_cav"];
const SINGLE_PARAMS: [&str; 3] = ["y_inf", "amplitude", "t1"];
const BI_PARAMS: [&str; 5] = ["y_inf", "a1", "tau1", "a2", "tau2"];

fn shot_noise_weights(counts: &[u64]) -> Vec<f64> {
    counts.iter().map(|&c| 1.0 / (c.max(1) as f64)).collect()
}

fn finish(names: &[&str], problem: &Problem<'_>, p0: &[f64]) -> Result<FitResult> {
    let out = minimize(problem, p0, &LmOptions::default())?;
    let result = FitResult::from_outcome(names, &out, problem.y.len());
    if !out.converged {
        return Err(FitError::NoConvergence { iterations: out.iterations, partial: Box::new(result) });
    }
    Ok(result)
}

fn broadband_from(p: &[f64], baseline: f64) -> BroadbandModel {
    BroadbandModel { amplitude_a: p[0], f0: p[1], kappa: p[2], b0: p[3], b1: p[4], b2: p[5], baseline }
}

/// Analytic Jacobian of the broadband model with respect to
/// (a, f0, κ, b0, b1, b2).
pub fn broadband_jacobian(p: &[f64], freqs: &[f64]) -> DMatrix<f64> {
    let (a, f0, kappa, b1, b2) = (p[0], p[1], p[2], p[4], p[5]);
    let h = kappa / 2.0;
    DMatrix::from_fn(freqs.len(), 6, |i, j| {
        let x = freqs[i] - f0;
        let den = x * x + h * h;
        match j {
            0 => h * h / den,
            1 => a * h * h * 2.0 * x / (den * den) - b1 - 2.0 * b2 * x,
            2 => a * h * x * x / (den * den),
            3 => 1.0,
            4 => x,
            _ => x * x,
        }
    })
}

/// Starting point from the data: peak position and height, FWHM from the
/// half-maximum crossings, flat background.
pub fn guess_broadband(spec: &SampledSpectrum, baseline: Option<f64>) -> Result<BroadbandModel> {
    if spec.len() < 3 {
        return Err(FitError::Underdetermined { need: 7, got: spec.len() });
    }
    let baseline = baseline.unwrap_or(DEFAULT_BASELINE_COUNTS);
    let y: Vec<f64> = spec.counts.iter().map(|&c| c as f64 - baseline).collect();
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let floor = y.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let half = floor + (ymax - floor) / 2.0;
    let mut lo = 0;
    while lo < imax && y[lo] < half {
        lo += 1;
    }
    let mut hi = y.len() - 1;
    while hi > imax && y[hi] < half {
        hi -= 1;
    }
    let f = &spec.frequencies;
    let span = f[f.len() - 1] - f[0];
    let mut kappa = (f[hi] - f[lo]).abs();
    if !(kappa > 0.0) {
        kappa = span.abs() / 10.0;
    }
    Ok(BroadbandModel {
        amplitude_a: (ymax - floor).max(1.0),
        f0: f[imax],
        kappa,
        b0: floor,
        b1: 0.0,
        b2: 0.0,
        baseline,
    })
}

/// Shot-noise-weighted fit of (a, f0, κ, b0, b1, b2); the baseline is held
/// at `init.baseline`. Adds the derived loaded Q = f0/κ.
pub fn fit_broadband(spec: &SampledSpectrum, init: &BroadbandModel) -> Result<FitResult> {
    if spec.len() < 7 {
        return Err(FitError::Underdetermined { need: 7, got: spec.len() });
    }
    init.validate().map_err(|e| FitError::InvalidInput(e.to_string()))?;
    let y: Vec<f64> = spec.counts.iter().map(|&c| c as f64).collect();
    let w = shot_noise_weights(&spec.counts);
    let freqs = &spec.frequencies;
    let baseline = init.baseline;
    let model = |p: &[f64]| {
        let m = broadband_from(p, baseline);
        freqs.iter().map(|&f| m.eval(f)).collect::<Vec<_>>()
    };
    let jac = |p: &[f64]| broadband_jacobian(p, freqs);
    let k = init.kappa;
    let amp = init.amplitude_a.abs().max(y.iter().cloned().fold(1.0, f64::max));
    let scales = [amp, k, k, amp, amp / k, amp / (k * k)];
    let p0 = [init.amplitude_a, init.f0, init.kappa, init.b0, init.b1, init.b2];
    let problem = Problem {
        names: &BROADBAND_PARAMS,
        y: &y,
        weights: &w,
        scales: &scales,
        model: &model,
        jacobian: Some(&jac),
    };
    let mut r = finish(&BROADBAND_PARAMS, &problem, &p0)?;
    let (f0, kappa) = (r.values[1], r.values[2]);
    let q = f0 / kappa;
    let mut grad = [0.0; 6];
    grad[1] = 1.0 / kappa;
    grad[2] = -f0 / (kappa * kappa);
    let sq = r.propagate(&grad);
    r.push_derived("q", q, sq);
    Ok(r)
}

/// Quantities fixed by a preceding broadband fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DitFixed {
    pub f_cav: f64,
    pub kappa: f64,
    pub bg_ratio: [f64; 3],
}

fn dit_model_from(init: &DitModel, fixed: &DitFixed, p: &[f64]) -> DitModel {
    let r0 = init.sys.rates;
    let split = if r0.kappa_total() > 0.0 { r0.kappa_i / r0.kappa_total() } else { 0.0 };
    let kappa_i = fixed.kappa * split;
    let rates = RateSet {
        f_cav: fixed.f_cav,
        f_emitter: fixed.f_cav + p[2],
        kappa_i,
        kappa_c: (fixed.kappa - kappa_i) / 2.0,
        g: p[0].abs(),
        gamma: p[1].abs(),
        ..r0
    };
    DitModel {
        sys: init.sys.with_rates(rates),
        geometry: init.geometry,
        bg_ratio: fixed.bg_ratio,
        fp: [p[3], p[4], p[5]],
        thermal: init.thermal,
    }
}

/// Fits g, γ, Δ and the Fabry-Perot envelope with the cavity frequency,
/// linewidth and background ratio held fixed. Adds the derived
/// cooperativity C = 4g²/(κγ).
///
/// The κ_i : κ_c split of `init` is preserved while its total is replaced
/// by `fixed.kappa`.
pub fn fit_dit(spec: &SampledSpectrum, fixed: &DitFixed, init: &DitModel) -> Result<FitResult> {
    if spec.len() < DIT_PARAMS.len() + 1 {
        return Err(FitError::Underdetermined { need: DIT_PARAMS.len() + 1, got: spec.len() });
    }
    if !(fixed.kappa > 0.0) {
        return Err(FitError::InvalidInput("fixed kappa must be positive".into()));
    }
    let y: Vec<f64> = spec.counts.iter().map(|&c| c as f64).collect();
    let w = shot_noise_weights(&spec.counts);
    let detunings = spec.detunings(fixed.f_cav);
    let model = |p: &[f64]| {
        let m = dit_model_from(init, fixed, p);
        detunings.iter().map(|&d| m.eval(d)).collect::<Vec<_>>()
    };
    let r0 = init.sys.rates;
    let span = (detunings[detunings.len() - 1] - detunings[0]).abs().max(r0.gamma);
    let fp0 = init.fp[0].abs().max(1.0);
    let scales = [
        r0.g.abs().max(r0.gamma),
        r0.gamma.max(1e-3 * r0.g.abs()),
        r0.detuning().abs().max(r0.gamma).max(r0.g.abs()),
        fp0,
        fp0 / span,
        fp0 / (span * span),
    ];
    if scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(FitError::InvalidInput("initial g and gamma must be positive".into()));
    }
    let p0 = [r0.g, r0.gamma, r0.detuning(), init.fp[0], init.fp[1], init.fp[2]];
    let problem = Problem {
        names: &DIT_PARAMS,
        y: &y,
        weights: &w,
        scales: &scales,
        model: &model,
        jacobian: None,
    };
    let mut r = finish(&DIT_PARAMS, &problem, &p0)?;
    for j in 0..2 {
        if r.values[j] < 0.0 {
            r.values[j] = -r.values[j];
            for k in 0..r.values.len() {
                if k != j {
                    r.covariance[j][k] = -r.covariance[j][k];
                    r.covariance[k][j] = -r.covariance[k][j];
                }
            }
        }
    }
    let (g, gamma) = (r.values[0], r.values[1]);
    let c = 4.0 * g * g / (fixed.kappa * gamma);
    let grad = [2.0 * c / g, -c / gamma, 0.0, 0.0, 0.0, 0.0];
    let sc = r.propagate(&grad);
    r.push_derived("cooperativity", c, sc);
    if !(r.sigmas[0] <= g) {
        return Err(FitError::Unidentifiable { param: "g".into(), result: Box::new(r) });
    }
    Ok(r)
}

/// Fits γ_eff(Δ) = γ + γ_cav·(κ²/4)/(Δ² + κ²/4) to `(Δ, γ_eff, σ)` points.
/// Adds the derived C = γ_cav/γ and g = √(γ_cav κ)/2.
pub fn fit_lineshape_vs_detuning(points: &[(f64, f64, f64)], kappa: f64) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(FitError::Underdetermined { need: 3, got: points.len() });
    }
    if !(kappa > 0.0) || points.iter().any(|p| !(p.2 > 0.0)) {
        return Err(FitError::InvalidInput("kappa and every sigma must be positive".into()));
    }
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let w: Vec<f64> = points.iter().map(|p| 1.0 / (p.2 * p.2)).collect();
    let h2 = kappa * kappa / 4.0;
    let lor: Vec<f64> = points.iter().map(|p| h2 / (p.0 * p.0 + h2)).collect();
    let model = |p: &[f64]| lor.iter().map(|l| p[0] + p[1] * l).collect::<Vec<_>>();
    let jac = |_: &[f64]| DMatrix::from_fn(lor.len(), 2, |i, j| if j == 0 { 1.0 } else { lor[i] });
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = ymax.abs().max(ymin.abs()).max(f64::MIN_POSITIVE);
    let p0 = [ymin, (ymax - ymin).max(1e-3 * scale)];
    let problem = Problem {
        names: &LINESHAPE_PARAMS,
        y: &y,
        weights: &w,
        scales: &[scale, scale],
        model: &model,
        jacobian: Some(&jac),
    };
    let mut r = finish(&LINESHAPE_PARAMS, &problem, &p0)?;
    let (gamma, gcav) = (r.values[0], r.values[1]);
    let c = gcav / gamma;
    let sc = r.propagate(&[-c / gamma, 1.0 / gamma]);
    r.push_derived("cooperativity", c, sc);
    let g = (gcav.max(0.0) * kappa).sqrt() / 2.0;
    let sg = if g > 0.0 { r.sigmas[1] * kappa / (8.0 * g) } else { f64::INFINITY };
    r.push_derived("g", g, sg);
    Ok(r)
}

const LINESHAPE_FREE_PARAMS: [&str; 3] = ["gamma", "gamma_cav", "kappa"];

/// As [`fit_lineshape_vs_detuning`] with κ also free, started from
/// `kappa_init`. Needs points spanning |Δ| ≳ κ/2 for κ to be identifiable.
pub fn fit_lineshape_free_kappa(points: &[(f64, f64, f64)], kappa_init: f64) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(FitError::Underdetermined { need: 4, got: points.len() });
    }
    let seed = fit_lineshape_vs_detuning(points, kappa_init)?;
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let w: Vec<f64> = points.iter().map(|p| 1.0 / (p.2 * p.2)).collect();
    let d: Vec<f64> = points.iter().map(|p| p.0).collect();
    let model = |p: &[f64]| {
        let h2 = p[2] * p[2] / 4.0;
        d.iter().map(|x| p[0] + p[1] * h2 / (x * x + h2)).collect::<Vec<_>>()
    };
    let jac = |p: &[f64]| {
        let h = p[2] / 2.0;
        DMatrix::from_fn(d.len(), 3, |i, j| {
            let x2 = d[i] * d[i];
            let den = x2 + h * h;
            match j {
                0 => 1.0,
                1 => h * h / den,
                _ => p[1] * h * x2 / (den * den),
            }
        })
    };
    let (g0, gc0) = (seed.values[0], seed.values[1]);
    let scale = g0.abs().max(gc0.abs()).max(f64::MIN_POSITIVE);
    let problem = Problem {
        names: &LINESHAPE_FREE_PARAMS,
        y: &y,
        weights: &w,
        scales: &[scale, scale, kappa_init],
        model: &model,
        jacobian: Some(&jac),
    };
    let mut r = finish(&LINESHAPE_FREE_PARAMS, &problem, &[g0, gc0, kappa_init])?;
    let (gamma, gcav) = (r.values[0], r.values[1]);
    let c = gcav / gamma;
    let sc = r.propagate(&[-c / gamma, 1.0 / gamma, 0.0]);
    r.push_derived("cooperativity", c, sc);
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayModel {
    Single,
    Bi,
}

/// y(t) = y∞ − Σ A_k exp(−t/τ_k) for parameters `[y∞, A1, τ1, (A2, τ2)]`.
pub fn exponential_model(p: &[f64], t: f64) -> f64 {
    let mut y = p[0];
    for pair in p[1..].chunks(2) {
        y -= pair[0] * (-t / pair[1]).exp();
    }
    y
}

fn exponential_jacobian(p: &[f64], ts: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(ts.len(), p.len(), |i, j| {
        if j == 0 {
            return 1.0;
        }
        let k = (j - 1) / 2 * 2 + 1;
        let (a, tau) = (p[k], p[k + 1]);
        let e = (-ts[i] / tau).exp();
        if j == k {
            -e
        } else {
            -a * e * ts[i] / (tau * tau)
        }
    })
}

fn guess_single(trace: &[(f64, f64, f64)]) -> [f64; 3] {
    let n = trace.len();
    let tail = (n / 10).max(1);
    let y_inf = trace[n - tail..].iter().map(|p| p.1).sum::<f64>() / tail as f64;
    let amp = y_inf - trace[0].1;
    let t0 = trace[0].0;
    let t1 = trace
        .iter()
        .find(|p| (p.1 - y_inf).abs() < amp.abs() / std::f64::consts::E)
        .map(|p| p.0 - t0)
        .filter(|dt| *dt > 0.0)
        .unwrap_or((trace[n - 1].0 - t0) / 3.0);
    // Amplitude at t = 0 rather than at the first sample.
    [y_inf, amp * (t0 / t1).exp(), t1]
}

fn fit_exp(trace: &[(f64, f64, f64)], names: &[&str], p0: &[f64]) -> Result<FitResult> {
    let ts: Vec<f64> = trace.iter().map(|p| p.0).collect();
    let y: Vec<f64> = trace.iter().map(|p| p.1).collect();
    let w: Vec<f64> = trace.iter().map(|p| 1.0 / (p.2 * p.2)).collect();
    let model = |p: &[f64]| ts.iter().map(|&t| exponential_model(p, t)).collect::<Vec<_>>();
    let jac = |p: &[f64]| exponential_jacobian(p, &ts);
    let yscale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let scales: Vec<f64> = p0
        .iter()
        .enumerate()
        .map(|(j, v)| if j > 0 && j % 2 == 0 { v.abs() } else { v.abs().max(yscale) })
        .collect();
    let problem = Problem { names, y: &y, weights: &w, scales: &scales, model: &model, jacobian: Some(&jac) };
    finish(names, &problem, p0)
}

/// Fits a recovery (or decay) curve to `(t, y, σ)` samples.
///
/// The bi-exponential fit is seeded from the single fit; when the two time
/// constants are not resolved (coincident within 2σ, an amplitude below 2σ,
/// or a singular Jacobian) the single-exponential result is returned with
/// `degenerate = true`.
pub fn fit_exponential_recovery(trace: &[(f64, f64, f64)], model: DecayModel) -> Result<FitResult> {
    let need = match model {
        DecayModel::Single => 4,
        DecayModel::Bi => 6,
    };
    if trace.len() < need {
        return Err(FitError::Underdetermined { need, got: trace.len() });
    }
    if trace.iter().any(|p| !(p.2 > 0.0) || !p.0.is_finite() || !p.1.is_finite()) {
        return Err(FitError::InvalidInput("samples need finite t, y and positive sigma".into()));
    }
    let single = fit_exp(trace, &SINGLE_PARAMS, &guess_single(trace))?;
    if model == DecayModel::Single {
        return Ok(single);
    }
    let (y_inf, amp, t1) = (single.values[0], single.values[1], single.values[2]);
    let p0 = [y_inf, amp / 2.0, t1 / 3.0, amp / 2.0, 3.0 * t1];
    let degenerate = match fit_exp(trace, &BI_PARAMS, &p0) {
        Ok(bi) => {
            let (a1, s1, tau1, st1) = (bi.values[1], bi.sigmas[1], bi.values[2], bi.sigmas[2]);
            let (a2, s2, tau2, st2) = (bi.values[3], bi.sigmas[3], bi.values[4], bi.sigmas[4]);
            let resolved = tau1 > 0.0
                && tau2 > 0.0
                && (tau1 - tau2).abs() > 2.0 * st1.hypot(st2)
                && a1.abs() > 2.0 * s1
                && a2.abs() > 2.0 * s2;
            if resolved {
                let mut bi = bi;
                if tau1 > tau2 {
                    swap_components(&mut bi);
                }
                return Ok(bi);
            }
            true
        }
        Err(FitError::SingularJacobian(_)) | Err(FitError::NoConvergence { .. }) => true,
        Err(e) => return Err(e),
    };
    Ok(FitResult { degenerate, ..single })
}

fn swap_components(r: &mut FitResult) {
    let perm = [0usize, 3, 4, 1, 2];
    let values = perm.iter().map(|&i| r.values[i]).collect();
    let sigmas = perm.iter().map(|&i| r.sigmas[i]).collect();
    let cov = perm.iter().map(|&i| perm.iter().map(|&j| r.covariance[i][j]).collect()).collect();
    r.values = values;
    r.sigmas = sigmas;
    r.covariance = cov;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::central_difference;
    use crate::model::CoupledSystem;
    use crate::scattering::Geometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn broadband_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = [
                rng.random_range(1e3..1e5),
                406.77e12 + rng.random_range(-50e9..50e9),
                rng.random_range(50e9..200e9),
                rng.random_range(0.0..1e3),
                rng.random_range(-1e-8..1e-8),
                rng.random_range(-1e-19..1e-19),
            ];
            let freqs: Vec<f64> = (0..41).map(|i| 406.77e12 + (i as f64 - 20.0) * 10e9).collect();
            let model = |q: &[f64]| {
                let m = broadband_from(q, 590.0);
                freqs.iter().map(|&f| m.eval(f)).collect::<Vec<_>>()
            };
            let scales = [p[0], p[2], p[2], p[0], p[0] / p[2], p[0] / (p[2] * p[2])];
            let fd = central_difference(&model, &p, &scales, freqs.len());
            let an = broadband_jacobian(&p, &freqs);
            for j in 0..6 {
                let norm = an.column(j).amax();
                for i in 0..freqs.len() {
                    assert!((fd[(i, j)] - an[(i, j)]).abs() <= 1e-5 * norm, "col {j}");
                }
            }
        }
    }

    #[test]
    fn exponential_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ts: Vec<f64> = (0..30).map(|i| i as f64 * 50e-6).collect();
        for _ in 0..20 {
            let p = [
                rng.random_range(0.5..2.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(100e-6..800e-6),
                rng.random_range(-1.0..1.0),
                rng.random_range(20e-6..100e-6),
            ];
            let model = |q: &[f64]| ts.iter().map(|&t| exponential_model(q, t)).collect::<Vec<_>>();
            let scales = [1.0, 1.0, p[2], 1.0, p[4]];
            let fd = central_difference(&model, &p, &scales, ts.len());
            let an = exponential_jacobian(&p, &ts);
            for j in 0..5 {
                let norm = an.column(j).amax();
                for i in 0..ts.len() {
                    assert!((fd[(i, j)] - an[(i, j)]).abs() <= 1e-5 * norm);
                }
            }
        }
    }

    #[test]
    fn dit_scales_cover_zero_detuning() {
        let rates = RateSet {
            f_cav: 406.77e12,
            f_emitter: 406.77e12,
            kappa_i: 0.0,
            kappa_c: 57.45e9,
            gamma: 0.11e9,
            gamma_d: 0.0,
            g: 2.13e9,
            delta_e: 50e9,
        };
        let init = DitModel {
            sys: CoupledSystem::new(rates, 4.0).unwrap(),
            geometry: Geometry::Drop,
            bg_ratio: [0.0; 3],
            fp: [1e4, 0.0, 0.0],
            thermal: false,
        };
        let fixed = DitFixed { f_cav: 406.77e12, kappa: 114.9e9, bg_ratio: [0.0; 3] };
        let m = dit_model_from(&init, &fixed, &[2.13e9, 0.11e9, 0.0, 1e4, 0.0, 0.0]);
        assert_eq!(m.sys.rates.kappa_total(), 114.9e9);
        assert_eq!(m.sys.rates.kappa_i, 0.0);
    }
}
