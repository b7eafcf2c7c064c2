//! Bulirsch's generalized complete elliptic integral
//!
//! cel(k_c, p, c, s) = ∫₀^{π/2} (c cos²φ + s sin²φ) /
//!                     ((cos²φ + p sin²φ) √(cos²φ + k_c² sin²φ)) dφ
//!
//! evaluated by the iterative arithmetic-geometric scheme.

use std::f64::consts::FRAC_PI_2;

const TOL: f64 = 1e-14;
const MAX_ITER: usize = 64;

/// `None` when k_c = 0, where the integral diverges.
pub fn cel(kc: f64, p: f64, c: f64, s: f64) -> Option<f64> {
    if kc == 0.0 || !kc.is_finite() {
        return None;
    }
    let mut k = kc.abs();
    let mut em = 1.0;
    let (mut pp, mut cc, mut ss);
    if p > 0.0 {
        pp = p.sqrt();
        cc = c;
        ss = s / pp;
    } else {
        let f = kc * kc;
        let q = (1.0 - f) * (s - c * p);
        let g = 1.0 - p;
        let f = f - p;
        pp = (f / g).sqrt();
        cc = (c - s) / g;
        ss = -q / (g * g * pp) + cc * pp;
    }
    let mut f = cc;
    cc += ss / pp;
    let mut g = k / pp;
    ss = 2.0 * (ss + f * g);
    pp += g;
    g = em;
    em += k;
    let mut kk = k;
    for _ in 0..MAX_ITER {
        if (g - k).abs() <= g * TOL {
            break;
        }
        k = 2.0 * kk.sqrt();
        kk = k * em;
        f = cc;
        cc += ss / pp;
        g = kk / pp;
        ss = 2.0 * (ss + f * g);
        pp += g;
        g = em;
        em += k;
    }
    Some(FRAC_PI_2 * (ss + cc * em) / (em * (em + pp)))
}
