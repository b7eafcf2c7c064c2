//! LIPO global maximization with an adaptive Lipschitz constant.
//!
//! Candidates are drawn uniformly in unit coordinates and evaluated only if
//! the Lipschitz upper bound `min_j f_j + k·‖x − x_j‖` reaches the current
//! maximum. `k` is the smallest value `(1 + α)^i` at or above the largest
//! slope seen between any two logged evaluations. The rule is applied
//! strictly; there is no random exploration step, so every LIPO entry of
//! the log can be replayed.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::objective::ObjectiveSpec;
use crate::param_box::{distance, ParamBox};
use crate::DesignError;

/// Ratio of the geometric grid for the Lipschitz constant.
pub const LIPSCHITZ_GRID_ALPHA: f64 = 0.01;
/// Consecutive rejected candidates after which the LIPO phase gives up.
pub const STALL_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Initial,
    Lipo,
    TrustRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub index: usize,
    pub point: Vec<f64>,
    pub unit: Vec<f64>,
    pub score: f64,
    /// Lipschitz constant in force when a LIPO candidate was accepted.
    pub lipschitz: Option<f64>,
    pub source: Source,
}

/// Every evaluation in order, shared by the global and local phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalLog {
    pub names: Vec<String>,
    pub entries: Vec<LogEntry>,
    max_slope: f64,
}

impl EvalLog {
    pub fn new(names: Vec<String>) -> Self {
        Self { names, entries: Vec::new(), max_slope: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best(&self) -> Option<&LogEntry> {
        self.entries.iter().fold(None, |b: Option<&LogEntry>, e| match b {
            Some(b) if b.score >= e.score => Some(b),
            _ => Some(e),
        })
    }

    /// Largest |f_i − f_j|/‖u_i − u_j‖ over all logged pairs.
    pub fn max_slope(&self) -> f64 {
        self.max_slope
    }

    pub(crate) fn push(&mut self, point: Vec<f64>, unit: Vec<f64>, score: f64, lipschitz: Option<f64>, source: Source) {
        for e in &self.entries {
            let d = distance(&e.unit, &unit);
            if d > 0.0 {
                self.max_slope = self.max_slope.max((e.score - score).abs() / d);
            }
        }
        let index = self.entries.len();
        self.entries.push(LogEntry { index, point, unit, score, lipschitz, source });
    }

    /// Indices of LIPO entries that violate the acceptance rule against the
    /// entries logged before them. Empty for a consistent log.
    pub fn replay_violations(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.source == Source::Lipo)
            .filter(|e| {
                let k = e.lipschitz.unwrap_or(f64::NAN);
                !accepts(&self.entries[..e.index], &e.unit, k)
            })
            .map(|e| e.index)
            .collect()
    }

    /// CSV with header `eval_index,<names>...,score`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DesignError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["eval_index".to_string()];
        header.extend(self.names.iter().cloned());
        header.push("score".into());
        wtr.write_record(&header)?;
        for e in &self.entries {
            let mut row = vec![e.index.to_string()];
            row.extend(e.point.iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", e.score));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<(), DesignError> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Smallest (1 + α)^i that is ≥ `slope`; 0 for a flat history.
pub fn grid_lipschitz(slope: f64) -> f64 {
    if slope <= 0.0 {
        return 0.0;
    }
    let base = 1.0 + LIPSCHITZ_GRID_ALPHA;
    let mut i = (slope.ln() / base.ln()).ceil() as i32;
    while base.powi(i) < slope {
        i += 1;
    }
    while base.powi(i - 1) >= slope {
        i -= 1;
    }
    base.powi(i)
}

/// The LIPO acceptance rule against `history` (unit coordinates).
pub fn accepts(history: &[LogEntry], u: &[f64], k: f64) -> bool {
    let Some(f_max) = history.iter().map(|e| e.score).reduce(f64::max) else {
        return true;
    };
    let bound = history.iter().map(|e| e.score + k * distance(&e.unit, u)).fold(f64::INFINITY, f64::min);
    bound >= f_max
}

/// Evaluation bookkeeping shared by the search phases: budget, unit-box
/// mapping and the log.
pub(crate) struct Evaluator<'a> {
    pub obj: &'a ObjectiveSpec,
    pub bx: &'a ParamBox,
    pub log: EvalLog,
    pub remaining: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(obj: &'a ObjectiveSpec, bx: &'a ParamBox, budget: usize) -> Self {
        Self { obj, bx, log: EvalLog::new(bx.names.clone()), remaining: budget }
    }

    /// Evaluates at unit coordinates `u`; `None` once the budget is spent.
    pub fn eval_unit(&mut self, u: &[f64], source: Source, k: Option<f64>) -> Option<f64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let x = self.bx.from_unit(u);
        let f = self.obj.evaluate(&x);
        self.log.push(x, u.to_vec(), f, k, source);
        Some(f)
    }

    pub fn eval_point(&mut self, x: &[f64], source: Source) -> Option<f64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let f = self.obj.evaluate(x);
        self.log.push(x.to_vec(), self.bx.to_unit(x), f, None, source);
        Some(f)
    }
}

/// Outcome of the LIPO stepping loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LipoStop {
    Budget,
    Stalled,
}

/// Runs LIPO steps until `n` candidates have been evaluated, the evaluator
/// budget is spent, or no candidate is accepted within [`STALL_LIMIT`]
/// draws. Seeds the log with `d + 1` uniform points if it is empty.
pub(crate) fn lipo_steps(ev: &mut Evaluator, rng: &mut ChaCha8Rng, n: usize) -> (usize, LipoStop) {
    let d = ev.bx.dim();
    let mut done = 0;
    while ev.log.len() < d + 1 && done < n {
        let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        if ev.eval_unit(&u, Source::Initial, None).is_none() {
            return (done, LipoStop::Budget);
        }
        done += 1;
    }
    while done < n {
        let k = grid_lipschitz(ev.log.max_slope());
        let mut accepted = None;
        for _ in 0..STALL_LIMIT {
            let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            if accepts(&ev.log.entries, &u, k) {
                accepted = Some(u);
                break;
            }
        }
        let Some(u) = accepted else {
            return (done, LipoStop::Stalled);
        };
        if ev.eval_unit(&u, Source::Lipo, Some(k)).is_none() {
            return (done, LipoStop::Budget);
        }
        done += 1;
    }
    (done, LipoStop::Budget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipoResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub log: EvalLog,
    /// The whole budget was used; the result is the best found so far.
    pub budget_exhausted: bool,
    /// Candidate sampling stopped finding acceptable points.
    pub stalled: bool,
}

pub fn lipo_maximize(obj: &ObjectiveSpec, bx: &ParamBox, budget: usize, seed: u64) -> Result<LipoResult, DesignError> {
    bx.validate()?;
    if budget < bx.dim() + 1 {
        return Err(DesignError::InvalidInput(format!("budget {budget} below dimension + 1")));
    }
    let mut ev = Evaluator::new(obj, bx, budget);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, stop) = lipo_steps(&mut ev, &mut rng, budget);
    let best = ev.log.best().expect("at least d + 1 evaluations").clone();
    Ok(LipoResult {
        best_point: best.point,
        best_value: best.score,
        budget_exhausted: ev.remaining == 0,
        stalled: stop == LipoStop::Stalled,
        log: ev.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_constant_brackets_slope() {
        for s in [1e-6, 0.3, 1.0, 1.005, 7.3, 1e4] {
            let k = grid_lipschitz(s);
            assert!(k >= s && k / (1.0 + LIPSCHITZ_GRID_ALPHA) < s, "{s} {k}");
        }
        assert_eq!(grid_lipschitz(0.0), 0.0);
    }

    #[test]
    fn empty_history_accepts() {
        assert!(accepts(&[], &[0.5], 0.0));
    }
}
