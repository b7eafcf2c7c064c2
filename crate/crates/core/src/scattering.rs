//! Steady-state input-output theory of an add-drop cavity coupled to a
//! two-level emitter in the weak-drive limit.
//!
//! With δ = f_drive − f_cav, Δ = f_emitter − f_cav, κ = κ_i + 2κ_c and
//! Γ = γ + γ_d every amplitude shares the denominator
//!
//! ```text
//! D(δ) = (iδ − κ/2)(i(δ − Δ) − Γ/2) + g²
//! ```
//!
//! Reciprocity (S11 = S22, S21 = S12) is built in, so only one element of
//! each pair is exposed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CoupledSystem, RateSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error("total cavity linewidth must be positive")]
    NoCavityLoss,
    #[error("emitter linewidth must be positive")]
    NoEmitterDecay,
    #[error("invalid drive grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, ScatteringError>;

/// Which bus port the transmission is collected from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Side-coupled cavity, light transmitted past it (S11).
    Thru,
    /// Mirror-coupled cavity, light transmitted through it (S21).
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Transmission,
    Fluorescence,
}

/// Strictly increasing list of drive-cavity detunings (Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DriveGrid(Vec<f64>);

impl DriveGrid {
    pub fn new(detunings: Vec<f64>) -> Result<Self> {
        if detunings.iter().any(|d| !d.is_finite()) {
            return Err(ScatteringError::InvalidGrid("non-finite detuning".into()));
        }
        if detunings.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ScatteringError::InvalidGrid("detunings must be strictly increasing".into()));
        }
        Ok(Self(detunings))
    }

    /// `n` evenly spaced detunings covering `[start, stop]`.
    pub fn linspace(start: f64, stop: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Self::new(vec![start]);
        }
        let step = (stop - start) / (n - 1) as f64;
        Self::new((0..n).map(|i| start + step * i as f64).collect())
    }

    pub fn detunings(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for DriveGrid {
    type Error = ScatteringError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DriveGrid> for Vec<f64> {
    fn from(g: DriveGrid) -> Self {
        g.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub detunings: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
}

impl ComplexSpectrum {
    /// Pointwise |amplitude|².
    pub fn intensity(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn check_cavity(rates: &RateSet) -> Result<()> {
    if rates.kappa_total() > 0.0 {
        Ok(())
    } else {
        Err(ScatteringError::NoCavityLoss)
    }
}

/// Emitter factor i(δ − Δ) − Γ/2.
#[inline]
fn emitter_term(rates: &RateSet, delta: f64) -> Complex64 {
    Complex64::new(-rates.gamma_total() / 2.0, delta - rates.detuning())
}

/// Shared denominator D(δ).
#[inline]
fn denominator(rates: &RateSet, delta: f64) -> Complex64 {
    let cavity = Complex64::new(-rates.kappa_total() / 2.0, delta);
    cavity * emitter_term(rates, delta) + rates.g * rates.g
}

/// Thru amplitude S11 at a single detuning.
pub fn thru_amplitude(rates: &RateSet, delta: f64) -> Complex64 {
    let e = emitter_term(rates, delta);
    let num = Complex64::new(-rates.kappa_i / 2.0, delta) * e + rates.g * rates.g;
    num / denominator(rates, delta)
}

/// Drop amplitude S21 at a single detuning.
pub fn drop_amplitude(rates: &RateSet, delta: f64) -> Complex64 {
    rates.kappa_c * emitter_term(rates, delta) / denominator(rates, delta)
}

/// Fluorescence amplitude F− per unit input amplitude at a single detuning.
pub fn fluorescence_amplitude(rates: &RateSet, delta: f64) -> Complex64 {
    let num = Complex64::new(0.0, -rates.g * (rates.kappa_c * rates.gamma).sqrt());
    num / denominator(rates, delta)
}

/// Bare-cavity amplitude with the emitter trapped in a dark orbital.
pub fn dark_amplitude(rates: &RateSet, geometry: Geometry, delta: f64) -> Complex64 {
    let cavity = Complex64::new(-rates.kappa_total() / 2.0, delta);
    match geometry {
        Geometry::Thru => Complex64::new(-rates.kappa_i / 2.0, delta) / cavity,
        Geometry::Drop => rates.kappa_c / cavity,
    }
}

/// Bright-state transmission amplitude for either geometry.
pub fn amplitude(rates: &RateSet, geometry: Geometry, delta: f64) -> Complex64 {
    match geometry {
        Geometry::Thru => thru_amplitude(rates, delta),
        Geometry::Drop => drop_amplitude(rates, delta),
    }
}

fn evaluate(grid: &DriveGrid, f: impl Fn(f64) -> Complex64) -> ComplexSpectrum {
    ComplexSpectrum {
        detunings: grid.detunings().to_vec(),
        amplitudes: grid.detunings().iter().map(|&d| f(d)).collect(),
    }
}

pub fn s_thru(sys: &CoupledSystem, grid: &DriveGrid) -> Result<ComplexSpectrum> {
    check_cavity(&sys.rates)?;
    Ok(evaluate(grid, |d| thru_amplitude(&sys.rates, d)))
}

pub fn s_drop(sys: &CoupledSystem, grid: &DriveGrid) -> Result<ComplexSpectrum> {
    check_cavity(&sys.rates)?;
    Ok(evaluate(grid, |d| drop_amplitude(&sys.rates, d)))
}

pub fn fluorescence(sys: &CoupledSystem, grid: &DriveGrid) -> Result<ComplexSpectrum> {
    if !(sys.rates.gamma > 0.0) {
        return Err(ScatteringError::NoEmitterDecay);
    }
    Ok(evaluate(grid, |d| fluorescence_amplitude(&sys.rates, d)))
}

pub fn dark_spectra(sys: &CoupledSystem, grid: &DriveGrid, geometry: Geometry) -> Result<ComplexSpectrum> {
    check_cavity(&sys.rates)?;
    Ok(evaluate(grid, |d| dark_amplitude(&sys.rates, geometry, d)))
}

/// Purcell-modified emitter lineshape in the lossy-cavity regime.
///
/// Returns `(Δ_eff, γ_eff)` where the shift is the cavity Lamb shift and the
/// broadening is the Purcell enhancement 4g²/κ weighted by the cavity
/// Lorentzian at Δ.
pub fn effective_lineshape(rates: &RateSet) -> Result<(f64, f64)> {
    check_cavity(rates)?;
    let kappa = rates.kappa_total();
    let delta = rates.detuning();
    let half2 = kappa * kappa / 4.0;
    let lor = delta * delta + half2;
    let g2 = rates.g * rates.g;
    let delta_eff = delta * (1.0 + g2 / lor);
    let gamma_eff = rates.gamma_total() + 4.0 * g2 / kappa * half2 / lor;
    Ok((delta_eff, gamma_eff))
}

/// Thermal ensemble average of bright and dark intensities at a single detuning.
pub fn thermal_intensity_at(
    rates: &RateSet,
    p_bright: f64,
    geometry: Geometry,
    channel: Channel,
    delta: f64,
) -> f64 {
    match channel {
        Channel::Transmission => {
            p_bright * amplitude(rates, geometry, delta).norm_sqr()
                + (1.0 - p_bright) * dark_amplitude(rates, geometry, delta).norm_sqr()
        }
        Channel::Fluorescence => p_bright * fluorescence_amplitude(rates, delta).norm_sqr(),
    }
}

/// Thermal average T = p_g|S|² + (1 − p_g)|S_dark|² (dark fluorescence is zero),
/// with p_g from the Boltzmann population of the system's orbital splitting.
pub fn thermal_average(
    sys: &CoupledSystem,
    grid: &DriveGrid,
    geometry: Geometry,
    channel: Channel,
) -> Result<Vec<f64>> {
    check_cavity(&sys.rates)?;
    if channel == Channel::Fluorescence && !(sys.rates.gamma > 0.0) {
        return Err(ScatteringError::NoEmitterDecay);
    }
    let p = sys.bright_population();
    Ok(grid
        .detunings()
        .iter()
        .map(|&d| thermal_intensity_at(&sys.rates, p, geometry, channel, d))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cooperativity;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix2, Vector2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const GHZ: f64 = 1e9;

    fn rates(g: f64, ki: f64, kc: f64, gamma: f64, gd: f64, delta: f64) -> RateSet {
        RateSet {
            f_cav: 406.77e12,
            f_emitter: 406.77e12 + delta,
            kappa_i: ki,
            kappa_c: kc,
            gamma,
            gamma_d: gd,
            g,
            delta_e: 50.0 * GHZ,
        }
    }

    fn sys(r: RateSet) -> CoupledSystem {
        CoupledSystem::new(r, 4.0).unwrap()
    }

    /// Solves the Fourier-domain Heisenberg-Langevin equations directly as a
    /// 2×2 linear system for (cavity, coherence) amplitudes with a unit drive
    /// on port 1, then forms the output fields from the input-output relations.
    fn oracle(r: &RateSet, delta: f64) -> (Complex64, Complex64, Complex64) {
        let i = Complex64::i();
        let kappa = r.kappa_i + 2.0 * r.kappa_c;
        let gam = r.gamma + r.gamma_d;
        let omega = delta; // frame rotating at the cavity frequency
        let w1 = r.f_emitter - r.f_cav;
        let m = Matrix2::new(
            -i * omega + kappa / 2.0,
            -i * r.g,
            -i * r.g,
            -i * (omega - w1) + gam / 2.0,
        );
        let rhs = Vector2::new(Complex64::new(-r.kappa_c.sqrt(), 0.0), Complex64::new(0.0, 0.0));
        let sol = m.lu().solve(&rhs).expect("nonsingular steady state");
        let a = sol[0];
        let sigma = sol[1];
        let s1_out = 1.0 + r.kappa_c.sqrt() * a;
        let s2_out = r.kappa_c.sqrt() * a;
        let f_out = r.gamma.sqrt() * sigma;
        (s1_out, s2_out, f_out)
    }

    fn rel_err(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
    }

    #[test]
    fn thru_limits() {
        let r = rates(0.0, 0.0, 47.5 * GHZ, 0.1 * GHZ, 0.0, 0.0);
        assert!(thru_amplitude(&r, 0.0).norm() < 1e-15);
        assert!((thru_amplitude(&r, 1e18).norm_sqr() - 1.0).abs() < 1e-9);
        assert!((thru_amplitude(&r, -1e18).norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn thru_matches_oracle_at_resonance() {
        let r = rates(2.0 * GHZ, 20.0 * GHZ, 47.5 * GHZ, 0.1 * GHZ, 0.0, 0.0);
        let (s1, _, _) = oracle(&r, 0.0);
        let t = thru_amplitude(&r, 0.0);
        assert!((t.norm_sqr() - s1.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn drop_examples() {
        let r = rates(0.0, 0.0, 47.5 * GHZ, 0.1 * GHZ, 0.0, 0.0);
        assert_relative_eq!(drop_amplitude(&r, 0.0).norm_sqr(), 1.0, max_relative = 1e-14);

        // |S21(0)|² = 1/(1+C)² when κ_i = γ_d = Δ = 0
        let kc = 30.0 * GHZ;
        let gamma = 0.1 * GHZ;
        let g = (2.0 * kc * gamma / 4.0).sqrt(); // C = 1
        let r = rates(g, 0.0, kc, gamma, 0.0, 0.0);
        assert_relative_eq!(cooperativity(&r).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(drop_amplitude(&r, 0.0).norm_sqr(), 0.25, max_relative = 1e-12);
    }

    #[test]
    fn decoupled_equals_dark() {
        let r = rates(0.0, 12.0 * GHZ, 47.5 * GHZ, 0.1 * GHZ, 0.05 * GHZ, 0.7 * GHZ);
        let grid = DriveGrid::linspace(-100.0 * GHZ, 100.0 * GHZ, 101).unwrap();
        let s = sys(r);
        for geom in [Geometry::Thru, Geometry::Drop] {
            let bright = match geom {
                Geometry::Thru => s_thru(&s, &grid).unwrap(),
                Geometry::Drop => s_drop(&s, &grid).unwrap(),
            };
            let dark = dark_spectra(&s, &grid, geom).unwrap();
            for (a, b) in bright.amplitudes.iter().zip(&dark.amplitudes) {
                assert!(rel_err(*a, *b) < 1e-14);
            }
        }
        assert!(fluorescence(&s, &grid).unwrap().amplitudes.iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn dark_examples() {
        let r = rates(0.0, 0.0, 47.5 * GHZ, 0.1 * GHZ, 0.0, 0.0);
        assert_relative_eq!(dark_amplitude(&r, Geometry::Drop, 0.0).norm(), 1.0, max_relative = 1e-14);
        let r = rates(0.0, 40.0 * GHZ, 20.0 * GHZ, 0.1 * GHZ, 0.0, 0.0);
        assert_relative_eq!(dark_amplitude(&r, Geometry::Thru, 0.0).norm_sqr(), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn fluorescence_peaks_at_effective_detuning() {
        let r = rates(2.0 * GHZ, 100.0 * GHZ, 0.0, 0.1 * GHZ, 0.0, 10.0 * GHZ);
        // κ_c = 0 would kill the drive; split the loss between ports instead
        let r = RateSet { kappa_i: 50.0 * GHZ, kappa_c: 25.0 * GHZ, ..r };
        let (d_eff, _) = effective_lineshape(&r).unwrap();
        let step = 1e6;
        let grid = DriveGrid::linspace(9.5 * GHZ, 10.5 * GHZ, 1001).unwrap();
        let s = sys(r);
        let spec = fluorescence(&s, &grid).unwrap();
        let (imax, _) = spec
            .intensity()
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!((grid.detunings()[imax] - d_eff).abs() <= step, "{} vs {}", grid.detunings()[imax], d_eff);
    }

    #[test]
    fn closed_forms_match_linear_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let r = rates(
                rng.random_range(0.0..10.0) * GHZ,
                rng.random_range(0.0..100.0) * GHZ,
                rng.random_range(0.1..100.0) * GHZ,
                rng.random_range(0.01..2.0) * GHZ,
                rng.random_range(0.0..1.0) * GHZ,
                rng.random_range(-50.0..50.0) * GHZ,
            );
            let d = rng.random_range(-150.0..150.0) * GHZ;
            let (s1, s2, f) = oracle(&r, d);
            assert!(rel_err(thru_amplitude(&r, d), s1) < 1e-10);
            assert!(rel_err(drop_amplitude(&r, d), s2) < 1e-10);
            assert!(rel_err(fluorescence_amplitude(&r, d), f) < 1e-10);
        }
    }

    #[test]
    fn effective_lineshape_limits() {
        let g = 2.13 * GHZ;
        let kappa = 114.9 * GHZ;
        let r = rates(g, kappa, 0.0, 0.110 * GHZ, 0.0, 0.0);
        let (d, gam) = effective_lineshape(&r).unwrap();
        assert_eq!(d, 0.0);
        assert_relative_eq!(gam, 0.110 * GHZ + 4.0 * g * g / kappa, max_relative = 1e-14);
        assert!((gam / GHZ - 0.268).abs() < 1e-3);
        assert!(((gam - 0.110 * GHZ) / 1e6 - 158.0).abs() < 0.5);

        let far = rates(g, kappa, 0.0, 0.110 * GHZ, 0.02 * GHZ, 1e16);
        let (d, gam) = effective_lineshape(&far).unwrap();
        assert_relative_eq!(d, 1e16, max_relative = 1e-9);
        assert_relative_eq!(gam, 0.130 * GHZ, max_relative = 1e-9);
    }

    #[test]
    fn thermal_average_examples() {
        let r = rates(2.0 * GHZ, 10.0 * GHZ, 40.0 * GHZ, 0.1 * GHZ, 0.0, 0.3 * GHZ);
        let grid = DriveGrid::linspace(-2.0 * GHZ, 2.0 * GHZ, 41).unwrap();
        // ΔE → large: p_g = 1
        let hot = CoupledSystem::new(RateSet { delta_e: 1e15, ..r }, 4.0).unwrap();
        let avg = thermal_average(&hot, &grid, Geometry::Drop, Channel::Transmission).unwrap();
        let bright = s_drop(&hot, &grid).unwrap().intensity();
        for (a, b) in avg.iter().zip(&bright) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
        // explicit mixture arithmetic
        let mixed = 0.65 * 0.25 + 0.35 * 1.0;
        assert_relative_eq!(mixed, 0.5125, max_relative = 1e-15);

        let s = sys(r);
        let p = s.bright_population();
        let fl = thermal_average(&s, &grid, Geometry::Drop, Channel::Fluorescence).unwrap();
        let bare = fluorescence(&s, &grid).unwrap().intensity();
        for (a, b) in fl.iter().zip(&bare) {
            assert_relative_eq!(*a, p * b, max_relative = 1e-14);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(DriveGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(DriveGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(DriveGrid::new(vec![-1.0, 0.0, 2.0]).is_ok());
    }

    #[test]
    fn passivity_over_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let r = rates(
                rng.random_range(0.0..20.0) * GHZ,
                rng.random_range(0.0..100.0) * GHZ,
                rng.random_range(0.0..100.0) * GHZ,
                rng.random_range(0.0..5.0) * GHZ,
                rng.random_range(0.0..5.0) * GHZ,
                rng.random_range(-50.0..50.0) * GHZ,
            );
            if r.kappa_total() == 0.0 {
                continue;
            }
            let d = rng.random_range(-200.0..200.0) * GHZ;
            assert!(thru_amplitude(&r, d).norm_sqr() <= 1.0 + 1e-12);
            assert!(drop_amplitude(&r, d).norm_sqr() <= 1.0 + 1e-12);
        }
    }
}
