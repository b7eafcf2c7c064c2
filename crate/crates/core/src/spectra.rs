//! Forward synthesis of measurement-like spectra.
//!
//! Two models are provided: the broadband Lorentzian-plus-quadratic
//! background used to locate the cavity, and the narrow-scan DIT model in
//! which the cavity-emitter transmission rides on the relative background
//! and is multiplied by a second-order Fabry-Perot envelope expanded about
//! the emitter detuning. Shot noise is added with [`sample_counts`].

use std::io::{Read, Write};
use std::path::Path;

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CoupledSystem;
use crate::rng::substream;
use crate::scattering::{self, Channel, DriveGrid, Geometry};

/// Dark-count baseline of the spectrometer (counts).
pub const DEFAULT_BASELINE_COUNTS: f64 = 590.0;
/// Near-resonant transmitted count rate (counts/s).
pub const DEFAULT_PEAK_RATE_CPS: f64 = 1e5;
/// Per-point exposure giving ≈10⁵ peak counts at the default rate.
pub const DEFAULT_EXPOSURE_S: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("negative expected intensity at index {0}")]
    NegativeIntensity(usize),
    #[error("malformed spectrum data: {0}")]
    Data(String),
    #[error(transparent)]
    Scattering(#[from] scattering::ScatteringError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SpectraError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroadbandModel {
    pub amplitude_a: f64,
    pub f0: f64,
    pub kappa: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub baseline: f64,
}

impl BroadbandModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(SpectraError::InvalidModel("kappa must be positive".into()));
        }
        if !(self.amplitude_a >= 0.0) || !(self.baseline >= 0.0) {
            return Err(SpectraError::InvalidModel(
                "amplitude and baseline must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Background coefficients relative to the Lorentzian amplitude, as
    /// consumed by the DIT model.
    pub fn background_ratio(&self) -> [f64; 3] {
        [self.b0 / self.amplitude_a, self.b1 / self.amplitude_a, self.b2 / self.amplitude_a]
    }

    /// Expected counts at absolute frequency `f` (Hz), baseline included.
    pub fn eval(&self, f: f64) -> f64 {
        let x = f - self.f0;
        let hw = self.kappa / 2.0;
        self.amplitude_a * hw * hw / (x * x + hw * hw)
            + self.b0
            + self.b1 * x
            + self.b2 * x * x
            + self.baseline
    }
}

/// y(ω) = a(κ/2)²/((ω−ω0)² + (κ/2)²) + b0 + b1(ω−ω0) + b2(ω−ω0)² + baseline.
pub fn broadband_intensity(model: &BroadbandModel, freqs: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    if freqs.iter().any(|f| !f.is_finite()) {
        return Err(SpectraError::InvalidModel("non-finite frequency".into()));
    }
    Ok(freqs.iter().map(|&f| model.eval(f)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DitModel {
    pub sys: CoupledSystem,
    pub geometry: Geometry,
    /// (b0, b1, b2)/a from a broadband fit; δ-expansion about the cavity.
    pub bg_ratio: [f64; 3],
    /// Fabry-Perot Taylor coefficients (f0, f1, f2) about δ = Δ.
    pub fp: [f64; 3],
    /// Use the thermal bright/dark ensemble instead of the pure two-level response.
    #[serde(default)]
    pub thermal: bool,
}

impl DitModel {
    pub fn validate(&self) -> Result<()> {
        if self.bg_ratio.iter().chain(self.fp.iter()).any(|c| !c.is_finite()) {
            return Err(SpectraError::InvalidModel("non-finite coefficient".into()));
        }
        self.sys
            .rates
            .validate()
            .map_err(|e| SpectraError::InvalidModel(e.to_string()))?;
        Ok(())
    }

    /// Fabry-Perot envelope at drive detuning δ.
    pub fn envelope(&self, delta: f64) -> f64 {
        let x = delta - self.sys.rates.detuning();
        self.fp[0] + self.fp[1] * x + self.fp[2] * x * x
    }

    /// Smallest envelope value over `[lo, hi]`.
    pub fn min_envelope(&self, lo: f64, hi: f64) -> f64 {
        let mut m = self.envelope(lo).min(self.envelope(hi));
        if self.fp[2] != 0.0 {
            let vertex = self.sys.rates.detuning() - self.fp[1] / (2.0 * self.fp[2]);
            if vertex > lo && vertex < hi {
                m = m.min(self.envelope(vertex));
            }
        }
        m
    }

    /// Model value at one detuning; no validation.
    pub fn eval(&self, delta: f64) -> f64 {
        let rates = &self.sys.rates;
        let t = if self.thermal {
            scattering::thermal_intensity_at(
                rates,
                self.sys.bright_population(),
                self.geometry,
                Channel::Transmission,
                delta,
            )
        } else {
            scattering::amplitude(rates, self.geometry, delta).norm_sqr()
        };
        let [r0, r1, r2] = self.bg_ratio;
        (t + r0 + r1 * delta + r2 * delta * delta) * self.envelope(delta)
    }
}

/// y(δ) = [T(δ) + (b0 + b1δ + b2δ²)/a]·(f0 + f1(δ−Δ) + f2(δ−Δ)²).
///
/// Errors if the Fabry-Perot envelope is not strictly positive across the
/// grid or any point comes out negative.
pub fn dit_intensity(model: &DitModel, grid: &DriveGrid) -> Result<Vec<f64>> {
    model.validate()?;
    if model.sys.rates.kappa_total() <= 0.0 {
        return Err(scattering::ScatteringError::NoCavityLoss.into());
    }
    let d = grid.detunings();
    if let (Some(&lo), Some(&hi)) = (d.first(), d.last()) {
        if !(model.min_envelope(lo, hi) > 0.0) {
            return Err(SpectraError::InvalidModel(
                "Fabry-Perot envelope is not positive over the scan window".into(),
            ));
        }
    }
    let y: Vec<f64> = d.iter().map(|&x| model.eval(x)).collect();
    if let Some(i) = y.iter().position(|v| *v < 0.0) {
        return Err(SpectraError::NegativeIntensity(i));
    }
    Ok(y)
}

/// Counts per point for a count rate (counts/s) and a per-point exposure (s).
pub fn counts_per_point(rate_cps: f64, exposure_s: f64) -> f64 {
    rate_cps * exposure_s
}

/// Photon counts recorded at absolute frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSpectrum {
    pub frequencies: Vec<f64>,
    pub counts: Vec<u64>,
    /// Exposure per point (s).
    pub exposure_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    frequency_hz: f64,
    counts: u64,
    exposure_s: f64,
}

impl SampledSpectrum {
    pub fn new(frequencies: Vec<f64>, counts: Vec<u64>, exposure_s: f64) -> Result<Self> {
        if frequencies.len() != counts.len() {
            return Err(SpectraError::Data("frequency and count lengths differ".into()));
        }
        Ok(Self { frequencies, counts, exposure_s })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Drive detunings relative to `f_ref`.
    pub fn detunings(&self, f_ref: f64) -> Vec<f64> {
        self.frequencies.iter().map(|f| f - f_ref).collect()
    }

    /// Writes `frequency_hz,counts,exposure_s` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for (&frequency_hz, &counts) in self.frequencies.iter().zip(&self.counts) {
            wtr.serialize(CsvRow { frequency_hz, counts, exposure_s: self.exposure_s })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut frequencies = Vec::new();
        let mut counts = Vec::new();
        let mut exposure = None;
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            frequencies.push(row.frequency_hz);
            counts.push(row.counts);
            exposure.get_or_insert(row.exposure_s);
        }
        let exposure_s = exposure.ok_or_else(|| SpectraError::Data("spectrum has no rows".into()))?;
        Self::new(frequencies, counts, exposure_s)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Generating model recorded in the JSON sidecar next to a spectrum CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratingModel {
    Broadband { model: BroadbandModel },
    Dit { model: DitModel, f_ref_hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub generator: GeneratingModel,
    pub seed: Option<u64>,
}

impl Sidecar {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Independent Poisson draws around `expected`, one ChaCha stream per point.
pub fn sample_counts(
    frequencies: &[f64],
    expected: &[f64],
    exposure_s: f64,
    seed: u64,
) -> Result<SampledSpectrum> {
    if frequencies.len() != expected.len() {
        return Err(SpectraError::Data("frequency and expectation lengths differ".into()));
    }
    let counts = expected
        .iter()
        .enumerate()
        .map(|(i, &mu)| draw_poisson(mu, seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    SampledSpectrum::new(frequencies.to_vec(), counts, exposure_s)
}

fn draw_poisson(mu: f64, seed: u64, index: u64) -> Result<u64> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(SpectraError::Data(format!("invalid expected count {mu}")));
    }
    if mu == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mu).map_err(|e| SpectraError::Data(e.to_string()))?;
    Ok(dist.sample(&mut substream(seed, index)) as u64)
}
