//! Coupled cavity-emitter data model and closed-form figures of merit.
//!
//! Every frequency and rate is stored as a cyclic quantity in Hz, i.e. the
//! angular value divided by 2π. All formulas used here are homogeneous in
//! 2π, so no conversion factors appear anywhere downstream.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::substream;

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Default dipole tilt of a ⟨111⟩ SiV relative to the TE field of a cavity on (001) diamond.
pub const DEFAULT_DIPOLE_TILT_DEG: f64 = 35.0;

/// Minimum number of Monte-Carlo samples accepted by [`expected_coupled_emitters`].
pub const MIN_MC_SAMPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Frequencies and rates of the coupled system, all cyclic (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub f_cav: f64,
    pub f_emitter: f64,
    pub kappa_i: f64,
    pub kappa_c: f64,
    pub gamma: f64,
    pub gamma_d: f64,
    pub g: f64,
    /// Ground-state orbital splitting ΔE/h.
    pub delta_e: f64,
}

impl RateSet {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.f_cav,
            self.f_emitter,
            self.kappa_i,
            self.kappa_c,
            self.gamma,
            self.gamma_d,
            self.g,
            self.delta_e,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::InvalidConfig("non-finite rate".into()));
        }
        if self.f_cav <= 0.0 || self.f_emitter <= 0.0 {
            return Err(ModelError::InvalidConfig(
                "cavity and emitter frequencies must be positive".into(),
            ));
        }
        if [self.kappa_i, self.kappa_c, self.gamma, self.gamma_d, self.g, self.delta_e]
            .iter()
            .any(|&v| v < 0.0)
        {
            return Err(ModelError::InvalidConfig("rates must be nonnegative".into()));
        }
        Ok(())
    }

    /// κ = κ_i + 2κ_c.
    pub fn kappa_total(&self) -> f64 {
        self.kappa_i + 2.0 * self.kappa_c
    }

    /// Emitter-cavity detuning Δ = f_emitter − f_cav.
    pub fn detuning(&self) -> f64 {
        self.f_emitter - self.f_cav
    }

    /// Total emitter dephasing-inclusive linewidth γ + γ_d.
    pub fn gamma_total(&self) -> f64 {
        self.gamma + self.gamma_d
    }

    /// Returns a copy with every frequency and rate multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            f_cav: self.f_cav * k,
            f_emitter: self.f_emitter * k,
            kappa_i: self.kappa_i * k,
            kappa_c: self.kappa_c * k,
            gamma: self.gamma * k,
            gamma_d: self.gamma_d * k,
            g: self.g * k,
            delta_e: self.delta_e * k,
        }
    }

    /// Same system with the coupling switched off.
    pub fn decoupled(&self) -> Self {
        Self { g: 0.0, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    pub f0: f64,
    pub q_total: f64,
    /// Mode volume in units of (λ/n)³.
    pub v_norm: f64,
    /// Squared normalized field projection at the emitter site.
    pub overlap: f64,
    /// 1/e intensity decay length into the substrate (m).
    pub decay_len_z: f64,
}

impl CavityMode {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_total > 0.0) || !(self.v_norm > 0.0) || !(self.decay_len_z > 0.0) {
            return Err(ModelError::InvalidConfig(
                "q_total, v_norm and decay_len_z must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(ModelError::InvalidConfig("overlap must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Effective in-plane area of the mode envelope (m²).
    ///
    /// The physical mode volume `v_norm·(λ/n)³` is divided by an effective
    /// vertical extent taken as the guiding slab thickness plus the evanescent
    /// decay length into the substrate.
    pub fn envelope_area(&self, wavelength: f64, index: f64, slab_thickness: f64) -> f64 {
        let cube = (wavelength / index).powi(3);
        self.v_norm * cube / (slab_thickness + self.decay_len_z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// γ0/γ.
    pub radiative_efficiency: f64,
    pub quantum_efficiency: f64,
    pub debye_waller: f64,
    pub dipole_axis: [f64; 3],
    /// Mean implantation depth (m).
    pub depth_mean: f64,
    /// Implantation straggle (m).
    pub depth_sigma: f64,
    /// Emitters per m².
    pub areal_density: f64,
    /// Fraction of emitters whose dipole orientation couples to the TE mode.
    /// Two of the four ⟨111⟩ orientations do on a ⟨110⟩-aligned cavity.
    pub coupled_orientation_fraction: f64,
}

impl Default for EmitterParams {
    fn default() -> Self {
        let s = 1.0 / 3f64.sqrt();
        Self {
            radiative_efficiency: 0.07,
            quantum_efficiency: 0.1,
            debye_waller: 0.7,
            dipole_axis: [-s, s, s],
            depth_mean: 20e-9,
            depth_sigma: 6.5e-9,
            areal_density: 50e12,
            coupled_orientation_fraction: 0.5,
        }
    }
}

impl EmitterParams {
    pub fn validate(&self) -> Result<()> {
        let effs = [
            self.radiative_efficiency,
            self.quantum_efficiency,
            self.debye_waller,
            self.coupled_orientation_fraction,
        ];
        if effs.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(ModelError::InvalidConfig("efficiencies must lie in [0, 1]".into()));
        }
        let norm = self.dipole_axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidConfig("dipole_axis must be a unit vector".into()));
        }
        if !(self.depth_sigma > 0.0) {
            return Err(ModelError::InvalidConfig("depth_sigma must be positive".into()));
        }
        if !(self.areal_density >= 0.0) {
            return Err(ModelError::InvalidConfig("areal_density must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledSystem {
    pub rates: RateSet,
    /// Kelvin.
    pub temperature: f64,
}

impl CoupledSystem {
    pub fn new(rates: RateSet, temperature: f64) -> Result<Self> {
        rates.validate()?;
        if !(temperature > 0.0) {
            return Err(ModelError::InvalidConfig("temperature must be positive".into()));
        }
        Ok(Self { rates, temperature })
    }

    /// Thermal weight of the optically bright orbital ground state.
    pub fn bright_population(&self) -> f64 {
        bright_population(self.rates.delta_e, self.temperature)
    }

    pub fn with_rates(&self, rates: RateSet) -> Self {
        Self { rates, ..*self }
    }
}

/// C = 4g²/(κγ) with κ = κ_i + 2κ_c.
pub fn cooperativity(rates: &RateSet) -> Result<f64> {
    let kappa = rates.kappa_total();
    if !(kappa > 0.0) || !(rates.gamma > 0.0) {
        return Err(ModelError::Domain(
            "cooperativity needs positive cavity and emitter linewidths".into(),
        ));
    }
    Ok(4.0 * rates.g * rates.g / (kappa * rates.gamma))
}

/// Purcell enhancement F = (3/4π²)(Q/V)·overlap·cos(tilt).
pub fn purcell_factor(q: f64, v_norm: f64, overlap: f64, dipole_tilt_deg: f64) -> Result<f64> {
    if !(q > 0.0) || !(v_norm > 0.0) {
        return Err(ModelError::Domain("Q and V must be positive".into()));
    }
    Ok(purcell_from_eta(q / v_norm * overlap, dipole_tilt_deg))
}

/// Purcell enhancement from the composite figure η = (Q/V)·overlap.
pub fn purcell_from_eta(eta: f64, dipole_tilt_deg: f64) -> f64 {
    3.0 / (4.0 * PI * PI) * eta * dipole_tilt_deg.to_radians().cos()
}

/// C = η_QE · η_DWF · F.
pub fn cooperativity_from_purcell(
    purcell: f64,
    quantum_efficiency: f64,
    debye_waller: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&quantum_efficiency) || !(0.0..=1.0).contains(&debye_waller) {
        return Err(ModelError::Domain("efficiencies must lie in [0, 1]".into()));
    }
    Ok(quantum_efficiency * debye_waller * purcell)
}

/// Boltzmann population of the lower orbital ground state,
/// p_g = 1/(1 + exp(−ΔE/k_BT)), with `delta_e` given as ΔE/h in Hz.
pub fn bright_population(delta_e: f64, temperature: f64) -> f64 {
    let x = PLANCK * delta_e / (BOLTZMANN * temperature);
    // logistic, written to stay finite for large |x|
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Evanescent overlap surrogate: exponential intensity decay in depth,
/// pinned to `overlap_ref` at `depth_ref`.
pub fn overlap_at_depth(depth: f64, decay_len_z: f64, overlap_ref: f64, depth_ref: f64) -> f64 {
    overlap_ref * (-(depth - depth_ref) / decay_len_z).exp()
}

/// Cooperativity of a single emitter from the cavity geometry,
/// C = (γ0/γ)·(3/4π²)·(Q/V)·overlap.
pub fn geometric_cooperativity(radiative_efficiency: f64, q: f64, v_norm: f64, overlap: f64) -> f64 {
    radiative_efficiency * 3.0 / (4.0 * PI * PI) * q / v_norm * overlap
}

/// Monte-Carlo estimate of the mean number of emitters under the cavity
/// envelope whose cooperativity reaches `c_threshold`.
///
/// The in-plane envelope is an isotropic Gaussian with integrated area
/// `mode_area`; emitters are sampled uniformly inside the disk of radius
/// 3σ and at Gaussian depths. `mode.overlap` is the peak overlap at the mean
/// emitter depth, and decays into the substrate with `mode.decay_len_z`.
pub fn expected_coupled_emitters(
    q: f64,
    c_threshold: f64,
    emitter: &EmitterParams,
    mode: &CavityMode,
    mode_area: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < MIN_MC_SAMPLES {
        return Err(ModelError::InvalidConfig(format!(
            "at least {MIN_MC_SAMPLES} samples required, got {samples}"
        )));
    }
    if !(mode_area > 0.0) || !(q > 0.0) {
        return Err(ModelError::InvalidConfig("mode_area and Q must be positive".into()));
    }
    emitter.validate()?;
    mode.validate()?;

    let sigma_r = (mode_area / (2.0 * PI)).sqrt();
    let r_max = 3.0 * sigma_r;
    let domain_area = PI * r_max * r_max;
    let total = emitter.areal_density * domain_area;
    if total == 0.0 {
        return Ok(0.0);
    }

    const PARTITIONS: usize = 8;
    let depth = Normal::new(emitter.depth_mean, emitter.depth_sigma)
        .map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
    let c_peak = geometric_cooperativity(emitter.radiative_efficiency, q, mode.v_norm, 1.0);

    let mut hits = 0usize;
    for part in 0..PARTITIONS {
        let n = samples / PARTITIONS + usize::from(part < samples % PARTITIONS);
        let mut rng = substream(seed, part as u64);
        for _ in 0..n {
            // uniform in the disk
            let r = r_max * rng.random::<f64>().sqrt();
            let coupled = rng.random::<f64>() < emitter.coupled_orientation_fraction;
            let mut z = depth.sample(&mut rng);
            while z < 0.0 {
                z = depth.sample(&mut rng);
            }
            let c = if coupled {
                let envelope = (-(r * r) / (2.0 * sigma_r * sigma_r)).exp();
                let ov = overlap_at_depth(z, mode.decay_len_z, mode.overlap, emitter.depth_mean);
                c_peak * ov.min(1.0) * envelope
            } else {
                0.0
            };
            if c >= c_threshold {
                hits += 1;
            }
        }
    }
    Ok(total * hits as f64 / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn siv1_rates() -> RateSet {
        RateSet {
            f_cav: 406.77e12,
            f_emitter: 406.77e12,
            kappa_i: 114.9e9,
            kappa_c: 0.0,
            gamma: 0.110e9,
            gamma_d: 0.0,
            g: 2.13e9,
            delta_e: 50e9,
        }
    }

    #[test]
    fn cooperativity_examples() {
        let c = cooperativity(&siv1_rates()).unwrap();
        assert_relative_eq!(c, 4.0 * 2.13f64.powi(2) / (114.9 * 0.110), max_relative = 1e-12);
        assert!((c - 1.436).abs() < 1e-3);

        let zero = RateSet { g: 0.0, ..siv1_rates() };
        assert_eq!(cooperativity(&zero).unwrap(), 0.0);

        let unit = RateSet { g: 1.0, kappa_i: 4.0, kappa_c: 0.0, gamma: 1.0, ..siv1_rates() };
        assert_relative_eq!(cooperativity(&unit).unwrap(), 1.0);
    }

    #[test]
    fn cooperativity_domain_errors() {
        let r = RateSet { gamma: 0.0, ..siv1_rates() };
        assert!(matches!(cooperativity(&r), Err(ModelError::Domain(_))));
        let r = RateSet { kappa_i: 0.0, kappa_c: 0.0, ..siv1_rates() };
        assert!(cooperativity(&r).is_err());
    }

    #[test]
    fn purcell_table_values() {
        let f = purcell_from_eta(5200.0, DEFAULT_DIPOLE_TILT_DEG);
        assert!((f - 323.7).abs() < 0.1, "{f}");
        let f_lim = purcell_from_eta(23500.0, DEFAULT_DIPOLE_TILT_DEG);
        assert!((f_lim - 1463.0).abs() < 1.0, "{f_lim}");
        assert_eq!(purcell_factor(3000.0, 2.0, 0.0, 35.0).unwrap(), 0.0);
        assert!(purcell_factor(0.0, 2.0, 0.1, 35.0).is_err());
    }

    #[test]
    fn purcell_is_linear() {
        let a = purcell_factor(1000.0, 2.0, 0.2, 35.0).unwrap();
        let b = purcell_factor(1000.0, 2.0, 0.4, 35.0).unwrap();
        let c = purcell_factor(2000.0, 2.0, 0.2, 35.0).unwrap();
        let d = purcell_factor(1000.0, 1.0, 0.2, 35.0).unwrap();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-14);
        assert_relative_eq!(c, 2.0 * a, max_relative = 1e-14);
        assert_relative_eq!(d, 2.0 * a, max_relative = 1e-14);
    }

    #[test]
    fn cooperativity_chain() {
        assert_relative_eq!(cooperativity_from_purcell(325.0, 0.1, 0.7).unwrap(), 22.75, max_relative = 1e-12);
        assert!((cooperativity_from_purcell(1462.0, 0.1, 0.7).unwrap() - 102.34).abs() < 1e-9);
        assert_eq!(cooperativity_from_purcell(1462.0, 0.0, 0.7).unwrap(), 0.0);
        assert!(cooperativity_from_purcell(1.0, 1.2, 0.7).is_err());
    }

    #[test]
    fn bright_population_values() {
        let p = bright_population(50e9, 4.0);
        assert!((p - 0.646).abs() < 5e-4, "{p}");
        assert_eq!(bright_population(0.0, 4.0), 0.5);
        assert!((bright_population(50e9, 1e-3) - 1.0).abs() < 1e-12);
        for &de in &[1e9, 5e10, 3e11] {
            for &t in &[0.5, 4.0, 300.0] {
                let s = bright_population(de, t) + bright_population(-de, t);
                assert_relative_eq!(s, 1.0, max_relative = 1e-14);
            }
        }
        assert!(bright_population(60e9, 4.0) > bright_population(50e9, 4.0));
        assert!(bright_population(50e9, 5.0) < bright_population(50e9, 4.0));
    }

    #[test]
    fn overlap_surrogate() {
        assert_eq!(overlap_at_depth(20e-9, 40e-9, 0.17, 20e-9), 0.17);
        assert_relative_eq!(
            overlap_at_depth(60e-9, 40e-9, 0.17, 20e-9),
            0.17 / std::f64::consts::E,
            max_relative = 1e-14
        );
        let v = overlap_at_depth(33e-9, 40e-9, 0.17, 20e-9);
        assert!((v - 0.123).abs() < 5e-4, "{v}");
    }

    fn fig1_mode() -> CavityMode {
        CavityMode { f0: 406.77e12, q_total: 3200.0, v_norm: 2.0, overlap: 0.17, decay_len_z: 40e-9 }
    }

    #[test]
    fn expected_count_examples() {
        let mode = fig1_mode();
        let emitter = EmitterParams::default();
        let area = mode.envelope_area(737e-9, 3.21, 182.8e-9);
        let n = expected_coupled_emitters(3200.0, 1.0, &emitter, &mode, area, 200_000, 7).unwrap();
        assert!((0.5..=2.0).contains(&n), "expected ≈ 1 coupled emitter, got {n}");

        let empty = EmitterParams { areal_density: 0.0, ..emitter };
        assert_eq!(expected_coupled_emitters(3200.0, 1.0, &empty, &mode, area, 10_000, 1).unwrap(), 0.0);

        let all = expected_coupled_emitters(3200.0, 0.0, &emitter, &mode, area, 10_000, 1).unwrap();
        let sigma2 = area / (2.0 * PI);
        assert_relative_eq!(all, emitter.areal_density * PI * 9.0 * sigma2, max_relative = 1e-12);

        assert!(matches!(
            expected_coupled_emitters(3200.0, 1.0, &emitter, &mode, area, 9_999, 1),
            Err(ModelError::InvalidConfig(_))
        ));
    }

    #[test]
    fn expected_count_is_deterministic_and_monotone() {
        let mode = fig1_mode();
        let emitter = EmitterParams::default();
        let area = mode.envelope_area(737e-9, 3.21, 182.8e-9);
        let a = expected_coupled_emitters(5000.0, 1.0, &emitter, &mode, area, 20_000, 42).unwrap();
        let b = expected_coupled_emitters(5000.0, 1.0, &emitter, &mode, area, 20_000, 42).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());

        let qs = [1000.0, 2000.0, 4000.0, 8000.0, 16000.0];
        let thresholds = [0.1, 1.0, 10.0];
        let grid: Vec<Vec<f64>> = thresholds
            .iter()
            .map(|&c| {
                qs.iter()
                    .map(|&q| expected_coupled_emitters(q, c, &emitter, &mode, area, 20_000, 3).unwrap())
                    .collect()
            })
            .collect();
        for row in &grid {
            assert!(row.windows(2).all(|w| w[1] >= w[0]), "{row:?}");
        }
        for j in 0..qs.len() {
            assert!(grid[0][j] >= grid[1][j] && grid[1][j] >= grid[2][j]);
        }
    }
}
