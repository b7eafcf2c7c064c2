//! Objectives for the design search.
//!
//! No electromagnetic solver is bundled. The search runs against any
//! [`Objective`]: the multi-bump landscape with known optima, the analytic
//! toy cavity surrogate, or an external program speaking a one-line JSON
//! protocol.

use std::io::Write;
use std::process::{Command, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::param_box::distance;
use crate::DesignError;

/// Imposed fabrication-limited Q during the search.
pub const DEFAULT_Q_FAB: f64 = 5e4;
/// Designs resonating outside this window (m) score zero.
pub const DEFAULT_WINDOW: (f64, f64) = (700e-9, 800e-9);

/// η = [Q_fab·Q_sim/(V(Q_fab + Q_sim))]·|E_y/max|E||².
///
/// `q_fab = None` removes the fabrication cap.
pub fn objective_eta(q_sim: f64, v_norm: f64, field_ratio: f64, q_fab: Option<f64>) -> Result<f64, DesignError> {
    if !(q_sim > 0.0 && v_norm > 0.0 && field_ratio >= 0.0) || q_fab.is_some_and(|q| !(q > 0.0)) {
        return Err(DesignError::InvalidInput("Q, V and Q_fab must be positive".into()));
    }
    let q = match q_fab {
        Some(qf) => qf * q_sim / (qf + q_sim),
        None => q_sim,
    };
    Ok(q / v_norm * field_ratio * field_ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub score: f64,
    /// Resonance wavelength (m) if the backend computes one.
    pub resonance_wavelength: Option<f64>,
}

impl From<f64> for Evaluation {
    fn from(score: f64) -> Self {
        Self { score, resonance_wavelength: None }
    }
}

pub trait Objective {
    /// Deterministic, side-effect-free evaluation at a point in the
    /// objective's own coordinates.
    fn evaluate_design(&self, x: &[f64]) -> Evaluation;

    /// Whether concurrent calls are safe.
    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// An objective with the resonance-wavelength feasibility gate.
pub struct ObjectiveSpec {
    objective: Box<dyn Objective>,
    pub feasible_window: Option<(f64, f64)>,
}

impl ObjectiveSpec {
    pub fn new(objective: Box<dyn Objective>, feasible_window: Option<(f64, f64)>) -> Self {
        Self { objective, feasible_window }
    }

    pub fn ungated(objective: Box<dyn Objective>) -> Self {
        Self::new(objective, None)
    }

    /// Score, or 0 for non-finite scores and for designs whose resonance is
    /// missing or outside the window.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let e = self.objective.evaluate_design(x);
        if !e.score.is_finite() {
            return 0.0;
        }
        if let Some((lo, hi)) = self.feasible_window {
            match e.resonance_wavelength {
                Some(l) if l >= lo && l <= hi => {}
                _ => return 0.0,
            }
        }
        e.score
    }

    pub fn concurrency_safe(&self) -> bool {
        self.objective.concurrency_safe()
    }
}

impl<F: Fn(&[f64]) -> f64> Objective for F {
    fn evaluate_design(&self, x: &[f64]) -> Evaluation {
        self(x).into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub height: f64,
    pub width: f64,
}

/// Sum of isotropic Gaussian bumps on the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBump {
    pub bumps: Vec<Bump>,
}

impl MultiBump {
    /// `n` bumps of width `width` with centers in [0.15, 0.85]^dim at least
    /// four widths apart. The first bump has height 1, the rest lie in
    /// [0.6, 0.85].
    pub fn seeded(dim: usize, n: usize, width: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bumps: Vec<Bump> = Vec::with_capacity(n);
        while bumps.len() < n {
            let center: Vec<f64> = (0..dim).map(|_| rng.random_range(0.15..0.85)).collect();
            if bumps.iter().all(|b| distance(&b.center, &center) >= 4.0 * width) {
                let height = if bumps.is_empty() { 1.0 } else { rng.random_range(0.6..0.85) };
                bumps.push(Bump { center, height, width });
            }
        }
        Self { bumps }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.bumps
            .iter()
            .map(|b| {
                let r2: f64 = x.iter().zip(&b.center).map(|(a, c)| (a - c) * (a - c)).sum();
                b.height * (-r2 / (2.0 * b.width * b.width)).exp()
            })
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for b in &self.bumps {
            let r2: f64 = x.iter().zip(&b.center).map(|(a, c)| (a - c) * (a - c)).sum();
            let s2 = b.width * b.width;
            let f = b.height * (-r2 / (2.0 * s2)).exp();
            for i in 0..x.len() {
                g[i] -= f * (x[i] - b.center[i]) / s2;
            }
        }
        g
    }

    /// Location and value of the global maximum, by gradient ascent from
    /// every bump center (tails of the other bumps shift the peaks slightly).
    pub fn global_max(&self) -> (Vec<f64>, f64) {
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        for b in &self.bumps {
            let mut x = b.center.clone();
            let step = b.width * b.width / b.height;
            for _ in 0..10_000 {
                let g = self.gradient(&x);
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                for i in 0..x.len() {
                    x[i] += step * g[i];
                }
                if gn * step < 1e-15 {
                    break;
                }
            }
            let v = self.value(&x);
            if v > best.1 {
                best = (x, v);
            }
        }
        best
    }
}

impl Objective for MultiBump {
    fn evaluate_design(&self, x: &[f64]) -> Evaluation {
        self.value(x).into()
    }
}

/// Reference design (m): w, h, w_x, w_y, a_cav, a_mir.
pub const TOY_REFERENCE: [f64; 6] = [402.8e-9, 182.8e-9, 66.3e-9, 112.0e-9, 132.5e-9, 140.1e-9];
pub const TOY_NAMES: [&str; 6] = ["w", "h", "wx", "wy", "a_cav", "a_mir"];

/// Analytic stand-in for the cavity simulation: resonance wavelength,
/// radiative Q, mode volume and field ratio as smooth functions of the six
/// nanobeam parameters, matching the optimized device at
/// [`TOY_REFERENCE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyCavity {
    pub q_fab: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyResponse {
    pub wavelength: f64,
    pub q_sim: f64,
    pub v_norm: f64,
    pub field_ratio: f64,
}

impl Default for ToyCavity {
    fn default() -> Self {
        Self { q_fab: Some(DEFAULT_Q_FAB) }
    }
}

impl ToyCavity {
    pub fn response(&self, x: &[f64]) -> ToyResponse {
        let [w, h, wx, wy, a_cav, a_mir] = [x[0], x[1], x[2], x[3], x[4], x[5]];
        let r = TOY_REFERENCE;
        let hole = wx * wy / (r[2] * r[3]);
        let wavelength = 737e-9
            * (a_cav / r[4]).powf(0.8)
            * (w / r[0]).powf(0.25)
            * (h / r[1]).powf(0.15)
            * (1.0 - 0.08 * (hole - 1.0));
        let chirp = a_mir / a_cav - 1.0;
        let chirp_ref = r[5] / r[4] - 1.0;
        let mismatch = ((chirp - chirp_ref) / 0.02).powi(2)
            + ((w / h - r[0] / r[1]) / 0.5).powi(2)
            + ((wy / w - r[3] / r[0]) / 0.08).powi(2)
            + ((wx / a_cav - r[2] / r[4]) / 0.15).powi(2);
        let q_sim = 1.75e5 * (-mismatch).exp();
        let v_norm = if chirp > 0.0 { 1.86 * (chirp_ref / chirp).sqrt() } else { f64::INFINITY };
        let field_ratio = (0.5 * (r[1] / h).sqrt()).min(1.0);
        ToyResponse { wavelength, q_sim, v_norm, field_ratio }
    }
}

impl Objective for ToyCavity {
    fn evaluate_design(&self, x: &[f64]) -> Evaluation {
        let r = self.response(x);
        let score = if r.v_norm.is_finite() {
            objective_eta(r.q_sim, r.v_norm, r.field_ratio, self.q_fab).unwrap_or(0.0)
        } else {
            0.0
        };
        Evaluation { score, resonance_wavelength: Some(r.wavelength) }
    }
}

/// Objective evaluated by an external program. For each point the program
/// is started once, receives `{"x": [...], "params": {name: value}}` on
/// stdin and must print either a number or
/// `{"score": s, "resonance_wavelength_m": λ}` on stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalObjective {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub names: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Reply {
    Scalar(f64),
    Full { score: f64, resonance_wavelength_m: Option<f64> },
}

impl ExternalObjective {
    pub fn try_evaluate(&self, x: &[f64]) -> Result<Evaluation, DesignError> {
        let params: serde_json::Map<String, serde_json::Value> =
            self.names.iter().zip(x).map(|(n, v)| (n.clone(), serde_json::json!(v))).collect();
        let request = serde_json::json!({ "x": x, "params": params });
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| DesignError::External(format!("spawn {}: {e}", self.command)))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            writeln!(stdin, "{request}").map_err(|e| DesignError::External(e.to_string()))?;
        }
        let out = child.wait_with_output().map_err(|e| DesignError::External(e.to_string()))?;
        if !out.status.success() {
            return Err(DesignError::External(format!("{} exited with {}", self.command, out.status)));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        match serde_json::from_str::<Reply>(text.trim()) {
            Ok(Reply::Scalar(score)) => Ok(score.into()),
            Ok(Reply::Full { score, resonance_wavelength_m }) => {
                Ok(Evaluation { score, resonance_wavelength: resonance_wavelength_m })
            }
            Err(e) => Err(DesignError::External(format!("bad reply {text:?}: {e}"))),
        }
    }
}

impl Objective for ExternalObjective {
    fn evaluate_design(&self, x: &[f64]) -> Evaluation {
        self.try_evaluate(x).unwrap_or_else(|e| {
            log::warn!("external objective failed: {e}");
            f64::NAN.into()
        })
    }

    fn concurrency_safe(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_examples() {
        let capped = objective_eta(1.75e5, 1.86, 0.5, Some(5e4)).unwrap();
        assert!((capped - 5230.0).abs() < 10.0, "{capped}");
        let free = objective_eta(1.75e5, 1.86, 0.5, None).unwrap();
        assert!((free - 23500.0).abs() < 50.0, "{free}");
        assert_eq!(objective_eta(1.75e5, 1.86, 0.0, Some(5e4)).unwrap(), 0.0);
        assert!(objective_eta(0.0, 1.86, 0.5, None).is_err());
    }

    #[test]
    fn toy_matches_reference_design() {
        let toy = ToyCavity::default();
        let r = toy.response(&TOY_REFERENCE);
        assert!((r.wavelength - 737e-9).abs() < 1e-15);
        assert!((r.q_sim - 1.75e5).abs() < 1e-6);
        assert!((r.v_norm - 1.86).abs() < 1e-12);
        let spec = ObjectiveSpec::new(Box::new(toy), Some(DEFAULT_WINDOW));
        assert!((spec.evaluate(&TOY_REFERENCE) - 5230.0).abs() < 10.0);
        let mut far = TOY_REFERENCE;
        far[4] *= 1.2;
        assert_eq!(spec.evaluate(&far), 0.0);
    }

    #[test]
    fn gate_zeroes_missing_resonance_and_nan() {
        let spec = ObjectiveSpec::new(Box::new(|_: &[f64]| 3.0), Some(DEFAULT_WINDOW));
        assert_eq!(spec.evaluate(&[0.0]), 0.0);
        let spec = ObjectiveSpec::ungated(Box::new(|_: &[f64]| f64::NAN));
        assert_eq!(spec.evaluate(&[0.0]), 0.0);
    }

    #[test]
    fn bump_global_max_is_near_tallest_center() {
        let m = MultiBump::seeded(6, 3, 0.15, 4);
        let (x, v) = m.global_max();
        assert!(distance(&x, &m.bumps[0].center) < 0.01);
        assert!(v >= 1.0 && v < 1.01);
    }
}
