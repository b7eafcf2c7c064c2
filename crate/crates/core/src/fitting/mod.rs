//! Weighted nonlinear least squares for the spectroscopy and relaxation
//! models, and inverse-variance pooling of repeated scans.
//!
//! Covariances are absolute: weights are true inverse variances (shot
//! noise or supplied σ), so no χ² rescaling is applied.

mod lm;
mod models;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lm::{central_difference, minimize, LmOptions, Outcome, Problem};
pub use models::{
    broadband_jacobian, exponential_model, fit_broadband, fit_dit, fit_exponential_recovery,
    fit_lineshape_free_kappa, fit_lineshape_vs_detuning, guess_broadband, DecayModel, DitFixed, DIT_PARAMS,
};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("underdetermined: need at least {need} points, got {got}")]
    Underdetermined { need: usize, got: usize },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize, partial: Box<FitResult> },
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("parameter {param} is unidentifiable (σ exceeds its magnitude)")]
    Unidentifiable { param: String, result: Box<FitResult> },
    #[error("no estimates left after rejection")]
    EmptyAfterRejection,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, FitError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedValue {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default)]
    pub derived: Vec<DerivedValue>,
    /// Set when a richer model collapsed onto a simpler one.
    #[serde(default)]
    pub degenerate: bool,
}

impl FitResult {
    pub(crate) fn from_outcome(names: &[&str], out: &Outcome, n_points: usize) -> Self {
        let n = names.len();
        let covariance: Vec<Vec<f64>> =
            (0..n).map(|j| (0..n).map(|k| 0.5 * (out.covariance[(j, k)] + out.covariance[(k, j)])).collect()).collect();
        let sigmas = (0..n).map(|j| covariance[j][j].max(0.0).sqrt()).collect();
        let dof = n_points.saturating_sub(n).max(1);
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            values: out.params.clone(),
            sigmas,
            covariance,
            chi2_reduced: out.chi2 / dof as f64,
            converged: out.converged,
            iterations: out.iterations,
            derived: Vec::new(),
            degenerate: false,
        }
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `(value, sigma)` of a fitted or derived quantity.
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        if let Some(i) = self.index(name) {
            return Some((self.values[i], self.sigmas[i]));
        }
        self.derived.iter().find(|d| d.name == name).map(|d| (d.value, d.sigma))
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|v| v.0)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.get(name).map(|v| v.1)
    }

    /// First-order propagation of the covariance through `grad`.
    pub fn propagate(&self, grad: &[f64]) -> f64 {
        let mut v = 0.0;
        for (j, gj) in grad.iter().enumerate() {
            for (k, gk) in grad.iter().enumerate() {
                v += gj * self.covariance[j][k] * gk;
            }
        }
        v.max(0.0).sqrt()
    }

    pub(crate) fn push_derived(&mut self, name: &str, value: f64, sigma: f64) {
        self.derived.push(DerivedValue { name: name.into(), value, sigma });
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Scan-level estimate of one quantity for pooling.
    pub fn estimate(&self, name: &str) -> Option<ScanEstimate> {
        self.get(name).map(|(value, sigma)| ScanEstimate {
            value,
            sigma,
            chi2_reduced: self.chi2_reduced,
            converged: self.converged,
        })
    }
}

/// One fitted quantity from one scan, with the fit's quality indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanEstimate {
    pub value: f64,
    pub sigma: f64,
    pub chi2_reduced: f64,
    pub converged: bool,
}

impl From<(f64, f64)> for ScanEstimate {
    fn from((value, sigma): (f64, f64)) -> Self {
        Self { value, sigma, chi2_reduced: 1.0, converged: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    pub mean: f64,
    pub sigma: f64,
    pub n_used: usize,
    pub n_rejected: usize,
}

/// Rejects non-converged fits and fits with χ²_red > 3.
pub fn default_reject(e: &ScanEstimate) -> bool {
    !e.converged || !(e.chi2_reduced <= 3.0)
}

/// Inverse-variance mean μ̄ = Σ(μ/σ²)/Σσ⁻² with σ̄ = (Σσ⁻²)^(−1/2).
pub fn pool(estimates: &[ScanEstimate], reject: impl Fn(&ScanEstimate) -> bool) -> Result<PooledEstimate> {
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut n_used = 0;
    let mut n_rejected = 0;
    let mut last = None;
    for e in estimates {
        if reject(e) {
            n_rejected += 1;
            continue;
        }
        if !(e.sigma > 0.0) || !e.value.is_finite() {
            return Err(FitError::InvalidInput(format!("invalid estimate {} ± {}", e.value, e.sigma)));
        }
        let w = 1.0 / (e.sigma * e.sigma);
        sw += w;
        swx += w * e.value;
        n_used += 1;
        last = Some(e);
    }
    if n_used == 0 {
        return Err(FitError::EmptyAfterRejection);
    }
    if let (1, Some(e)) = (n_used, last) {
        return Ok(PooledEstimate { mean: e.value, sigma: e.sigma, n_used, n_rejected });
    }
    Ok(PooledEstimate { mean: swx / sw, sigma: sw.sqrt().recip(), n_used, n_rejected })
}

/// Pools plain `(μ, σ)` pairs without rejection.
pub fn pool_values(values: &[(f64, f64)]) -> Result<PooledEstimate> {
    let est: Vec<ScanEstimate> = values.iter().map(|&v| v.into()).collect();
    pool(&est, |_| false)
}

/// Writes one row per fit: `index,<name>,<name>_sigma,...,chi2_reduced,converged`.
/// All fits must share the parameter list of the first.
pub fn write_batch_csv<W: Write>(results: &[FitResult], w: W) -> std::result::Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    let Some(first) = results.first() else {
        return Ok(());
    };
    let mut header = vec!["index".to_string()];
    for n in &first.names {
        header.push(n.clone());
        header.push(format!("{n}_sigma"));
    }
    header.push("chi2_reduced".into());
    header.push("converged".into());
    wtr.write_record(&header)?;
    for (i, r) in results.iter().enumerate() {
        let mut row = vec![i.to_string()];
        for (v, s) in r.values.iter().zip(&r.sigmas) {
            row.push(v.to_string());
            row.push(s.to_string());
        }
        row.push(r.chi2_reduced.to_string());
        row.push(r.converged.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pool_examples() {
        let p = pool_values(&[(1.0, 0.1), (2.0, 0.3)]).unwrap();
        assert_relative_eq!(p.mean, 1.1, max_relative = 1e-12);
        assert!((p.sigma - 0.0949).abs() < 1e-4);

        let eq = pool_values(&[(1.0, 0.2), (2.0, 0.2), (6.0, 0.2), (3.0, 0.2)]).unwrap();
        assert_relative_eq!(eq.mean, 3.0, max_relative = 1e-12);
        assert_relative_eq!(eq.sigma, 0.1, max_relative = 1e-12);

        let one = pool_values(&[(4.2, 0.7)]).unwrap();
        assert_eq!((one.mean, one.sigma, one.n_used), (4.2, 0.7, 1));
    }

    #[test]
    fn rejection_counts_and_empty() {
        let est = [
            ScanEstimate { value: 1.0, sigma: 0.1, chi2_reduced: 1.1, converged: true },
            ScanEstimate { value: 9.0, sigma: 0.1, chi2_reduced: 7.0, converged: true },
            ScanEstimate { value: 9.0, sigma: 0.1, chi2_reduced: 1.0, converged: false },
        ];
        let p = pool(&est, default_reject).unwrap();
        assert_eq!((p.mean, p.n_used, p.n_rejected), (1.0, 1, 2));
        assert!(matches!(pool(&est[1..], default_reject), Err(FitError::EmptyAfterRejection)));
        assert!(pool_values(&[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn fit_result_json_round_trip() {
        let r = FitResult {
            names: vec!["a".into(), "b".into()],
            values: vec![1.0, 2.5e9],
            sigmas: vec![0.1, 3e6],
            covariance: vec![vec![0.01, 1.0], vec![1.0, 9e12]],
            chi2_reduced: 0.97,
            converged: true,
            iterations: 7,
            derived: vec![DerivedValue { name: "c".into(), value: 3.0, sigma: 0.2 }],
            degenerate: false,
        };
        let back = FitResult::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get("c"), Some((3.0, 0.2)));
        let mut buf = Vec::new();
        write_batch_csv(&[r.clone(), r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,a,a_sigma,b,b_sigma,chi2_reduced,converged\n"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn pooling_is_permutation_invariant_and_scale_covariant(
            vals in prop::collection::vec((-10.0f64..10.0, 0.01f64..5.0), 1..12),
            k in 0.01f64..100.0,
            rot in 0usize..12,
        ) {
            let p = pool_values(&vals).unwrap();
            let mut shuffled = vals.clone();
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
            shuffled.reverse();
            let q = pool_values(&shuffled).unwrap();
            prop_assert!((p.mean - q.mean).abs() <= 1e-12 * (1.0 + p.mean.abs()));
            prop_assert!((p.sigma - q.sigma).abs() <= 1e-12 * p.sigma);
            let scaled: Vec<(f64, f64)> = vals.iter().map(|(m, s)| (k * m, k * s)).collect();
            let s = pool_values(&scaled).unwrap();
            prop_assert!((s.mean - k * p.mean).abs() <= 1e-9 * (1.0 + (k * p.mean).abs()));
            prop_assert!((s.sigma - k * p.sigma).abs() <= 1e-12 * k * p.sigma);
        }
    }
}
