//! Config documents. Unknown keys are rejected and physical quantities
//! carry unit suffixes in their key names.

use std::path::PathBuf;

use cqed_core::model::RateSet;
use cqed_core::scattering::Geometry;
use cqed_design::search::Schedule;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Parses a config, reporting the offending field path with line and
/// column.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        // serde_json appends the line and column itself.
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

fn four_kelvin() -> f64 {
    4.0
}
fn orbital_splitting() -> f64 {
    50e9
}
fn unit_envelope() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub f_cav_hz: f64,
    pub f_emitter_hz: f64,
    #[serde(default)]
    pub kappa_i_hz: f64,
    pub kappa_c_hz: f64,
    pub gamma_hz: f64,
    #[serde(default)]
    pub gamma_d_hz: f64,
    pub g_hz: f64,
    #[serde(default = "orbital_splitting")]
    pub delta_e_hz: f64,
}

impl From<RatesConfig> for RateSet {
    fn from(r: RatesConfig) -> Self {
        RateSet {
            f_cav: r.f_cav_hz,
            f_emitter: r.f_emitter_hz,
            kappa_i: r.kappa_i_hz,
            kappa_c: r.kappa_c_hz,
            gamma: r.gamma_hz,
            gamma_d: r.gamma_d_hz,
            g: r.g_hz,
            delta_e: r.delta_e_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_peak_rate")]
    pub peak_rate_cps: f64,
    #[serde(default = "default_exposure")]
    pub exposure_s: f64,
}

fn default_peak_rate() -> f64 {
    cqed_core::spectra::DEFAULT_PEAK_RATE_CPS
}
fn default_exposure() -> f64 {
    cqed_core::spectra::DEFAULT_EXPOSURE_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub geometry: Geometry,
    pub rates: RatesConfig,
    #[serde(default = "four_kelvin")]
    pub temperature_k: f64,
    /// Thermal bright/dark ensemble instead of the pure two-level response.
    #[serde(default)]
    pub thermal: bool,
    pub detuning_start_hz: f64,
    pub detuning_stop_hz: f64,
    pub points: usize,
    /// Background (b0, b1, b2)/a about the cavity.
    #[serde(default)]
    pub background_ratio: [f64; 3],
    /// Fabry-Perot envelope coefficients (f0, f1 per Hz, f2 per Hz²).
    #[serde(default = "unit_envelope")]
    pub fabry_perot: [f64; 3],
    /// Poisson-sampled counts are written when present.
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Broadband,
    Dit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub f_cav_hz: f64,
    pub kappa_hz: f64,
    #[serde(default)]
    pub background_ratio: [f64; 3],
}

/// Starting point of a DIT fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterGuess {
    pub detuning_hz: f64,
    pub g_hz: f64,
    pub gamma_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub model: FitModel,
    /// Spectrum CSVs, relative to the config file.
    pub inputs: Vec<PathBuf>,
    /// Broadband fits: expected flat baseline counts for the initial guess.
    #[serde(default)]
    pub baseline_counts: Option<f64>,
    /// DIT fits: broadband spectrum fitted first to fix f_cav, κ and the
    /// background (two-stage flow).
    #[serde(default)]
    pub broadband_input: Option<PathBuf>,
    /// DIT fits: cavity parameters when no broadband spectrum is given.
    #[serde(default)]
    pub cavity: Option<CavityConfig>,
    #[serde(default)]
    pub emitter: Option<EmitterGuess>,
    #[serde(default = "drop_geometry")]
    pub geometry: Geometry,
    /// κ_i/κ of the cavity.
    #[serde(default)]
    pub kappa_i_fraction: f64,
    /// Quantities pooled across inputs; defaults to q or cooperativity.
    #[serde(default)]
    pub pool: Option<Vec<String>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn drop_geometry() -> Geometry {
    Geometry::Drop
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    pub t1_s: f64,
    #[serde(default)]
    pub pump_rate_hz: f64,
    /// Mean counts per simulated bin in ↓ and ↑.
    pub mu_down: f64,
    pub mu_up: f64,
    pub bin_width_s: f64,
    #[serde(default)]
    pub pump_duration_s: f64,
    pub probe_duration_s: f64,
    pub sequences: usize,
    /// Bins merged before classification.
    #[serde(default = "one")]
    pub rebin: usize,
    /// Counts above the threshold read as ↑; optimal from the bimodal fit
    /// when absent.
    #[serde(default)]
    pub threshold: Option<u64>,
    #[serde(default = "yes")]
    pub drop_first_bin: bool,
    /// Also write the first sequence as a trace CSV.
    #[serde(default)]
    pub write_trace: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    MultiBump {
        dim: usize,
        #[serde(default = "three")]
        bumps: usize,
        #[serde(default = "bump_width")]
        width: f64,
        #[serde(default)]
        landscape_seed: u64,
    },
    ToyCavity {
        /// Fabrication-limited Q; `null` removes the cap.
        #[serde(default = "q_fab")]
        q_fab: Option<f64>,
    },
    External {
        command: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

fn three() -> usize {
    3
}
fn bump_width() -> f64 {
    0.15
}
fn q_fab() -> Option<f64> {
    Some(cqed_design::objective::DEFAULT_Q_FAB)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub objective: ObjectiveConfig,
    /// Required for external objectives; defaults to the unit box or ±10%
    /// around the reference cavity.
    #[serde(default)]
    pub bounds: Option<Vec<BoundConfig>>,
    /// Resonance window (m); defaults to 700–800 nm for the toy cavity.
    #[serde(default)]
    pub window_m: Option<[f64; 2]>,
    #[serde(default = "global_budget")]
    pub global_budget: usize,
    #[serde(default = "local_budget")]
    pub local_budget: usize,
    #[serde(default = "n_clusters")]
    pub n_clusters: usize,
    #[serde(default = "schedule")]
    pub schedule: Schedule,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn global_budget() -> usize {
    200
}
fn local_budget() -> usize {
    300
}
fn n_clusters() -> usize {
    5
}
fn schedule() -> Schedule {
    Schedule::GlobalThenLocal
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountConfig {
    #[serde(default = "mount_diameter")]
    pub diameter_m: f64,
    #[serde(default = "mount_thickness")]
    pub thickness_m: f64,
    #[serde(default = "smco")]
    pub remanence_t: f64,
    /// Solve the sample height and remanence from the target field at the
    /// intended position.
    #[serde(default = "yes")]
    pub calibrate: bool,
    #[serde(default = "target_field")]
    pub target_field_t: f64,
    #[serde(default = "ideal_position")]
    pub ideal_position_m: [f64; 2],
    /// Sample height above the magnet center when not calibrating.
    #[serde(default)]
    pub sample_height_m: Option<f64>,
}

impl Default for MountConfig {
    fn default() -> Self {
        parse("{}").expect("all mount fields have defaults")
    }
}

fn mount_diameter() -> f64 {
    cqed_magnet::mount::MOUNT_DIAMETER
}
fn mount_thickness() -> f64 {
    cqed_magnet::mount::MOUNT_THICKNESS
}
fn smco() -> f64 {
    cqed_magnet::field::SMCO_BR
}
fn target_field() -> f64 {
    cqed_magnet::mount::TARGET_FIELD
}
fn ideal_position() -> [f64; 2] {
    cqed_magnet::mount::IDEAL_POSITION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalMagnetConfig {
    #[serde(default = "ext_diameter")]
    pub diameter_m: f64,
    #[serde(default = "ext_thickness")]
    pub thickness_m: f64,
    #[serde(default = "ndfeb")]
    pub remanence_t: f64,
    /// Distance of the magnet center along x.
    #[serde(default = "standoff")]
    pub standoff_m: f64,
    #[serde(default = "ext_axis")]
    pub axis: [f64; 3],
    #[serde(default = "sweep_range")]
    pub y_range_m: [f64; 2],
    #[serde(default = "sweep_range")]
    pub z_range_m: [f64; 2],
    #[serde(default = "sweep_points")]
    pub points: usize,
}

fn ext_diameter() -> f64 {
    cqed_magnet::mount::EXTERNAL_DIAMETER
}
fn ext_thickness() -> f64 {
    cqed_magnet::mount::EXTERNAL_THICKNESS
}
fn ndfeb() -> f64 {
    cqed_magnet::field::NDFEB_BR
}
fn standoff() -> f64 {
    cqed_magnet::mount::EXTERNAL_STANDOFF
}
fn ext_axis() -> [f64; 3] {
    [-1.0, 0.0, 0.0]
}
fn sweep_range() -> [f64; 2] {
    [-0.08, 0.08]
}
fn sweep_points() -> usize {
    161
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetConfig {
    #[serde(default)]
    pub mount: MountConfig,
    #[serde(default = "measured_position")]
    pub sample_position_m: [f64; 2],
    /// One of [-111], [1-11], [111], [-1-11].
    #[serde(default = "primary_axis")]
    pub siv_axis: String,
    /// Sample rotation about the surface normal.
    #[serde(default)]
    pub rotation_deg: f64,
    #[serde(default)]
    pub external: Option<ExternalMagnetConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn measured_position() -> [f64; 2] {
    cqed_magnet::mount::MEASURED_POSITION
}
fn primary_axis() -> String {
    "[-111]".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub q_sim: f64,
    /// Simulated on-resonance drop transmission.
    pub t_sim: f64,
    pub q_exp: f64,
    pub f0_hz: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = parse::<BudgetConfig>("{\n \"q_sim\": 1, \"t_sim\": 0.5, \"q_exp\": 1, \"f0_hz\": 1, \"extra\": 2}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("extra") && msg.contains("line 2"), "{msg}");
        let err = parse::<OptimizeConfig>(r#"{"objective": {"kind": "toy_cavity", "q_fab": 1, "oops": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("oops"), "{err}");
    }

    #[test]
    fn defaults_fill_in() {
        let m: MagnetConfig = parse("{}").unwrap();
        assert_eq!(m.siv_axis, "[-111]");
        assert!(m.mount.calibrate);
        let o: OptimizeConfig = parse(r#"{"objective": {"kind": "toy_cavity", "q_fab": null}}"#).unwrap();
        assert_eq!(o.objective, ObjectiveConfig::ToyCavity { q_fab: None });
        let o: OptimizeConfig = parse(r#"{"objective": {"kind": "toy_cavity"}}"#).unwrap();
        assert_eq!(o.objective, ObjectiveConfig::ToyCavity { q_fab: Some(5e4) });
    }
}
