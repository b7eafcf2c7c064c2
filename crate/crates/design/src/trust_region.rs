//! Derivative-free trust-region refinement.
//!
//! Each iteration samples a stencil of 2d points along d orthonormal
//! directions around the incumbent (one-sided at a bound), fits a separable
//! quadratic model in that frame and maximizes it over the ∞-norm trust
//! region clipped to the box. All work
//! happens in unit coordinates. The incumbent only moves to strictly better
//! evaluated points.

use serde::{Deserialize, Serialize};

use crate::lipo::{Evaluator, Source};
use crate::objective::ObjectiveSpec;
use crate::param_box::ParamBox;
use crate::DesignError;

pub const INITIAL_RADIUS: f64 = 0.1;
pub const MAX_RADIUS: f64 = 0.25;
pub const MIN_RADIUS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub final_radius: f64,
    /// Stopped on budget rather than on radius collapse.
    pub budget_exhausted: bool,
}

/// Largest t ≥ 0 with u + t·b inside the unit box.
fn room(u: &[f64], b: &[f64]) -> f64 {
    u.iter().zip(b).fold(f64::INFINITY, |t, (ui, bi)| {
        if *bi > 0.0 {
            t.min((1.0 - ui) / bi)
        } else if *bi < 0.0 {
            t.min(-ui / bi)
        } else {
            t
        }
    })
}

fn along(u: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    u.iter().zip(b).map(|(ui, bi)| (ui + t * bi).clamp(0.0, 1.0)).collect()
}

/// Orthonormal basis whose first vector is `v`, completed from `basis`.
fn rotate(basis: &[Vec<f64>], v: &[f64]) -> Vec<Vec<f64>> {
    let d = v.len();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(d);
    for cand in std::iter::once(v).chain(basis.iter().map(|b| b.as_slice())) {
        let mut w = cand.to_vec();
        for q in &out {
            let p: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let n = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            out.push(w.iter().map(|a| a / n).collect());
        }
        if out.len() == d {
            break;
        }
    }
    out
}

/// Refines from an evaluated incumbent using at most `budget` evaluations.
///
/// The stencil directions start on the coordinate axes and are rotated so
/// that the first one follows the last accepted move, which lets the
/// separable model track curved ridges.
pub(crate) fn refine(ev: &mut Evaluator, start: &[f64], start_value: f64, budget: usize) -> TrustRegionResult {
    let d = ev.bx.dim();
    let mut x = start.to_vec();
    let mut u = ev.bx.to_unit(start);
    let mut f = start_value;
    let mut radius = INITIAL_RADIUS;
    let mut basis: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut used = 0;
    let mut exhausted = false;

    'outer: while radius >= MIN_RADIUS {
        if used + 2 * d + 1 > budget {
            exhausted = true;
            break;
        }
        let h = radius;
        let mut g = vec![0.0; d];
        let mut hess = vec![0.0; d];
        let mut limits = vec![(0.0, 0.0); d];
        let mut best_probe: Option<(Vec<f64>, f64)> = None;
        for (i, b) in basis.iter().enumerate() {
            let neg: Vec<f64> = b.iter().map(|v| -v).collect();
            let (up, down) = (room(&u, b), room(&u, &neg));
            limits[i] = (-down, up);
            // Centered pair, or two steps toward the open side near a bound.
            let offsets = if up >= h && down >= h {
                (h, -h)
            } else if up >= 2.0 * h {
                (h, 2.0 * h)
            } else if down >= 2.0 * h {
                (-h, -2.0 * h)
            } else if up > 1e-3 * h && down > 1e-3 * h {
                (up, -down)
            } else {
                hess[i] = -1.0;
                continue;
            };
            let mut vals = [0.0; 2];
            for (slot, off) in [offsets.0, offsets.1].into_iter().enumerate() {
                let p = along(&u, b, off);
                let Some(v) = ev.eval_unit(&p, Source::TrustRegion, None) else {
                    exhausted = true;
                    break 'outer;
                };
                used += 1;
                vals[slot] = v;
                if v > f && best_probe.as_ref().is_none_or(|(_, bv)| v > *bv) {
                    best_probe = Some((p, v));
                }
            }
            // Exact quadratic through (0, f), (a, fa), (c, fc).
            let (a, c) = offsets;
            let (fa, fc) = (vals[0] - f, vals[1] - f);
            let c2 = (fa / a - fc / c) / (a - c);
            g[i] = fa / a - c2 * a;
            hess[i] = 2.0 * c2;
        }

        let model = |s: &[f64]| (0..d).map(|i| g[i] * s[i] + 0.5 * hess[i] * s[i] * s[i]).sum::<f64>();
        let mut step = vec![0.0; d];
        for i in 0..d {
            let lo = (-radius).max(limits[i].0);
            let hi = radius.min(limits[i].1);
            let m = |s: f64| g[i] * s + 0.5 * hess[i] * s * s;
            step[i] = if hess[i] < 0.0 {
                (-g[i] / hess[i]).clamp(lo, hi)
            } else if m(hi) >= m(lo) {
                hi
            } else {
                lo
            };
        }
        // Combined move clipped to the box, expressed back in the basis.
        let p: Vec<f64> = (0..d)
            .map(|j| (u[j] + (0..d).map(|i| step[i] * basis[i][j]).sum::<f64>()).clamp(0.0, 1.0))
            .collect();
        let taken: Vec<f64> = basis.iter().map(|b| b.iter().zip(&p).zip(&u).map(|((bj, pj), uj)| bj * (pj - uj)).sum()).collect();
        let pred = model(&taken);
        let step_len = taken.iter().fold(0.0f64, |a, s| a.max(s.abs()));

        let mut trial = None;
        if pred > 0.0 && step_len > 0.0 {
            let Some(v) = ev.eval_unit(&p, Source::TrustRegion, None) else {
                exhausted = true;
                break;
            };
            used += 1;
            trial = Some((p, v));
        }
        let rho = match &trial {
            Some((_, v)) => (v - f) / pred,
            None => f64::NEG_INFINITY,
        };

        let mut candidates: Vec<(Vec<f64>, f64)> = best_probe.into_iter().collect();
        candidates.extend(trial.filter(|(_, v)| *v > f));
        if let Some((p, v)) = candidates.into_iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
            let moved: Vec<f64> = p.iter().zip(&u).map(|(a, b)| a - b).collect();
            basis = rotate(&basis, &moved);
            x = ev.bx.from_unit(&p);
            u = p;
            f = v;
        }

        if rho > 0.75 && step_len >= 0.99 * radius {
            radius = (2.0 * radius).min(MAX_RADIUS);
        } else if rho < 0.25 {
            radius = 0.25 * radius.min(step_len.max(radius * 0.25));
        }
    }

    TrustRegionResult { point: x, value: f, evaluations: used, final_radius: radius, budget_exhausted: exhausted }
}

/// Refines from `start` (evaluated first, counted against `budget`).
pub fn trust_region_refine(
    obj: &ObjectiveSpec,
    start: &[f64],
    bx: &ParamBox,
    budget: usize,
) -> Result<TrustRegionResult, DesignError> {
    bx.validate()?;
    if !bx.contains(start) {
        return Err(DesignError::InvalidInput("start outside box".into()));
    }
    if budget == 0 {
        return Err(DesignError::InvalidInput("budget must be positive".into()));
    }
    let mut ev = Evaluator::new(obj, bx, budget);
    let f0 = ev.eval_point(start, Source::TrustRegion).expect("budget ≥ 1");
    let mut r = refine(&mut ev, start, f0, budget - 1);
    r.evaluations += 1;
    Ok(r)
}
