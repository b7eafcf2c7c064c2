//! Coupled-mode decomposition of cavity quality factors.
//!
//! A simulated add-drop cavity has `1/Q_sim = 1/Q_rad + 2/Q_c` (two symmetric
//! waveguide ports). A fabricated device loses additional light to
//! imperfections, `1/Q_exp = 1/Q_sim + 1/Q_fab`, which acts as a reduced
//! radiative Q. The budget is always derived from the simulated drop
//! transmission; reflection is an output only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fabrication Q values above this are reported as infeasible.
pub const DEFAULT_Q_FAB_CAP: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("infeasible loss budget: {0}")]
    Infeasible(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, BudgetError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QBudget {
    pub q_sim: f64,
    pub q_exp: f64,
    pub q_rad: f64,
    pub q_c: f64,
    pub q_fab: f64,
    pub f0: f64,
}

/// Loss rates (Hz, cyclic) associated with each Q of a budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRates {
    pub kappa_exp: f64,
    pub kappa_sim: f64,
    pub kappa_rad: f64,
    pub kappa_c: f64,
    pub kappa_fab: f64,
}

impl QBudget {
    /// Builds the full budget from the simulated Q and drop transmission and
    /// the measured Q.
    pub fn from_measurement(q_sim: f64, t_sim: f64, q_exp: f64, f0: f64) -> Result<Self> {
        let (q_rad, q_c) = decompose_from_transmission(q_sim, t_sim)?;
        let q_fab = fabrication_q(q_exp, q_sim)?;
        let budget = Self { q_sim, q_exp, q_rad, q_c, q_fab, f0 };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.q_sim, self.q_exp, self.q_rad, self.q_c, self.q_fab, self.f0];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(BudgetError::InvalidInput("budget entries must be positive".into()));
        }
        let closes = |lhs: f64, rhs: f64| ((lhs - rhs) / lhs).abs() <= 1e-9;
        if !closes(1.0 / self.q_sim, 1.0 / self.q_rad + 2.0 / self.q_c) {
            return Err(BudgetError::Infeasible("1/Q_sim ≠ 1/Q_rad + 2/Q_c".into()));
        }
        if !closes(1.0 / self.q_exp, 1.0 / self.q_sim + 1.0 / self.q_fab) {
            return Err(BudgetError::Infeasible("1/Q_exp ≠ 1/Q_sim + 1/Q_fab".into()));
        }
        Ok(())
    }

    /// Radiative Q including fabrication loss.
    pub fn q_rad_effective(&self) -> f64 {
        1.0 / (1.0 / self.q_rad + 1.0 / self.q_fab)
    }

    pub fn rates(&self) -> LossRates {
        LossRates {
            kappa_exp: q_to_rate(self.q_exp, self.f0),
            kappa_sim: q_to_rate(self.q_sim, self.f0),
            kappa_rad: q_to_rate(self.q_rad, self.f0),
            kappa_c: q_to_rate(self.q_c, self.f0),
            kappa_fab: q_to_rate(self.q_fab, self.f0),
        }
    }
}

/// Splits a simulated Q into radiative and per-port coupling Q using the
/// on-resonance drop transmission T = 4Q²/Q_c². Returns `(q_rad, q_c)`.
pub fn decompose_from_transmission(q_sim: f64, t_sim: f64) -> Result<(f64, f64)> {
    if !(q_sim > 0.0) {
        return Err(BudgetError::InvalidInput("Q_sim must be positive".into()));
    }
    if !(t_sim > 0.0 && t_sim <= 1.0) {
        return Err(BudgetError::InvalidInput("T_sim must lie in (0, 1]".into()));
    }
    let q_c = 2.0 * q_sim / t_sim.sqrt();
    let inv_rad = 1.0 / q_sim - 2.0 / q_c;
    if !(inv_rad > 0.0) || (inv_rad * q_sim) < 1e-12 {
        return Err(BudgetError::Infeasible(
            "coupling loss accounts for all simulated loss".into(),
        ));
    }
    Ok((1.0 / inv_rad, q_c))
}

/// Q_fab from 1/Q_exp = 1/Q_sim + 1/Q_fab.
pub fn fabrication_q(q_exp: f64, q_sim: f64) -> Result<f64> {
    fabrication_q_capped(q_exp, q_sim, DEFAULT_Q_FAB_CAP)
}

pub fn fabrication_q_capped(q_exp: f64, q_sim: f64, cap: f64) -> Result<f64> {
    if !(q_exp > 0.0) || !(q_sim > 0.0) {
        return Err(BudgetError::InvalidInput("Q values must be positive".into()));
    }
    if q_exp >= q_sim {
        return Err(BudgetError::Infeasible("measured Q must be below simulated Q".into()));
    }
    let q_fab = 1.0 / (1.0 / q_exp - 1.0 / q_sim);
    if !(q_fab <= cap) {
        return Err(BudgetError::Infeasible(format!("Q_fab {q_fab:e} exceeds cap {cap:e}")));
    }
    Ok(q_fab)
}

/// On-resonance reflection and transmission `(R, T)` of the fabricated device,
/// R = (Q_exp/Q_rad)² and T = 4(Q_exp/Q_c)².
pub fn on_resonance_estimates(budget: &QBudget) -> (f64, f64) {
    let r = (budget.q_exp / budget.q_rad).powi(2);
    let t = 4.0 * (budget.q_exp / budget.q_c).powi(2);
    (r, t)
}

/// κ = f0/Q (cyclic).
pub fn q_to_rate(q: f64, f0: f64) -> f64 {
    f0 / q
}
