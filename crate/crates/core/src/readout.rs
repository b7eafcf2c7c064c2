//! Spin quantum jumps and single-shot readout analysis.
//!
//! The spin is a two-state Markov process. Thermal flips occur at the same
//! rate 1/T1 in each direction, so the dwell time in either state is
//! exponential with mean T1 and a prepared population relaxes toward 1/2
//! with time constant T1/2. During the pump step an extra rate drives ↓→↑.
//! Photon counts per bin are Poisson with a mean interpolated linearly in
//! the fraction of the bin spent in ↑.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Discrete, Poisson as PoissonDist};
use statrs::function::gamma::{gamma_lr, gamma_ur};
use thiserror::Error;

use crate::fitting::FitResult;
use crate::rng::substream;

#[derive(Debug, Error)]
pub enum ReadoutError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("bimodal fit did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("unimodal histogram: μ↓ = {mu_down:.3}, μ↑ = {mu_up:.3} not separated beyond their joint σ")]
    UnimodalDegenerate { mu_down: f64, mu_up: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ReadoutError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinState {
    Down,
    Up,
}

impl SpinState {
    pub fn flipped(self) -> Self {
        match self {
            Self::Down => Self::Up,
            Self::Up => Self::Down,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelegraphConfig {
    /// Spin relaxation time (s); thermal flip rate 1/T1 per direction.
    pub t1: f64,
    /// Extra ↓→↑ rate during the pump step (1/s); may be infinite.
    pub pump_rate: f64,
    /// Mean counts per bin in ↓ and ↑.
    pub mu_down: f64,
    pub mu_up: f64,
    pub bin_width: f64,
    pub pump_duration: f64,
    pub probe_duration: f64,
    pub seed: u64,
}

impl TelegraphConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ReadoutError::InvalidConfig(m.into()));
        if !(self.t1 > 0.0) {
            return bad("t1 must be positive");
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return bad("bin_width must be positive");
        }
        if !(self.probe_duration > 0.0 && self.probe_duration.is_finite()) {
            return bad("probe_duration must be positive");
        }
        if !(self.pump_duration >= 0.0 && self.pump_duration.is_finite()) {
            return bad("pump_duration must be nonnegative");
        }
        if !(self.pump_rate >= 0.0) {
            return bad("pump_rate must be nonnegative");
        }
        if !(self.mu_down >= 0.0 && self.mu_up >= 0.0) || !self.mu_down.is_finite() || !self.mu_up.is_finite() {
            return bad("count means must be finite and nonnegative");
        }
        Ok(())
    }

    /// Thermal flip rate in each direction.
    pub fn flip_rate(&self) -> f64 {
        1.0 / self.t1
    }

    pub fn n_bins(&self) -> usize {
        (self.probe_duration / self.bin_width + 1e-9).floor() as usize
    }
}

/// One pump-probe sequence: the spin path over the whole sequence and the
/// photon counts of the probe window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelegraphTrace {
    pub initial_state: SpinState,
    /// Flip times (s from sequence start), strictly increasing.
    pub jump_times: Vec<f64>,
    /// Start of the probe window (s from sequence start).
    pub probe_start: f64,
    pub bin_width: f64,
    pub bins: Vec<u64>,
}

impl TelegraphTrace {
    pub fn state_at(&self, t: f64) -> SpinState {
        let n = self.jump_times.partition_point(|&j| j <= t);
        if n % 2 == 0 {
            self.initial_state
        } else {
            self.initial_state.flipped()
        }
    }

    /// Time spent in ↑ within `[a, b)`.
    pub fn up_time(&self, a: f64, b: f64) -> f64 {
        let mut state = self.state_at(a);
        let mut t = a;
        let mut up = 0.0;
        let first = self.jump_times.partition_point(|&j| j <= a);
        for &j in &self.jump_times[first..] {
            if j >= b {
                break;
            }
            if state == SpinState::Up {
                up += j - t;
            }
            t = j;
            state = state.flipped();
        }
        if state == SpinState::Up {
            up += b - t;
        }
        up
    }

    /// Fraction of probe bin `i` spent in ↑.
    pub fn up_fraction(&self, i: usize) -> f64 {
        let a = self.probe_start + i as f64 * self.bin_width;
        self.up_time(a, a + self.bin_width) / self.bin_width
    }

    /// Majority state of probe bin `i`.
    pub fn true_state(&self, i: usize) -> SpinState {
        if self.up_fraction(i) >= 0.5 {
            SpinState::Up
        } else {
            SpinState::Down
        }
    }

    /// Writes `t_s,counts,state_true` rows (t from probe start, state 1 = ↑).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t_s", "counts", "state_true"])?;
        for (i, c) in self.bins.iter().enumerate() {
            let s = match self.true_state(i) {
                SpinState::Up => "1",
                SpinState::Down => "0",
            };
            wtr.write_record([(i as f64 * self.bin_width).to_string(), c.to_string(), s.to_string()])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn simulate_one(cfg: &TelegraphConfig, index: u64) -> TelegraphTrace {
    let mut path_rng = substream(cfg.seed, 2 * index);
    let mut count_rng = substream(cfg.seed, 2 * index + 1);
    let r = cfg.flip_rate();
    let initial_state = if path_rng.random::<bool>() { SpinState::Up } else { SpinState::Down };
    let mut state = initial_state;
    let mut jump_times = Vec::new();
    let probe_start = cfg.pump_duration;
    let end = probe_start + cfg.n_bins() as f64 * cfg.bin_width;

    let mut t = 0.0;
    if cfg.pump_duration > 0.0 && cfg.pump_rate.is_infinite() {
        // Instantaneous pumping: ↑ at the end of the pump step.
        if state == SpinState::Down {
            jump_times.push(0.0);
            state = SpinState::Up;
        }
        t = cfg.pump_duration;
    }
    while t < end {
        let (rate, phase_end) = if t < probe_start {
            let extra = if state == SpinState::Down { cfg.pump_rate } else { 0.0 };
            (r + extra, probe_start)
        } else {
            (r, end)
        };
        let wait = Exp::new(rate).map(|d| d.sample(&mut path_rng)).unwrap_or(f64::INFINITY);
        if t + wait >= phase_end {
            t = phase_end;
            continue;
        }
        t += wait;
        jump_times.push(t);
        state = state.flipped();
    }

    let mut trace = TelegraphTrace { initial_state, jump_times, probe_start, bin_width: cfg.bin_width, bins: Vec::new() };
    trace.bins = (0..cfg.n_bins())
        .map(|i| {
            let f = trace.up_fraction(i);
            let mu = cfg.mu_down * (1.0 - f) + cfg.mu_up * f;
            if mu > 0.0 {
                Poisson::new(mu).map(|d| d.sample(&mut count_rng) as u64).unwrap_or(0)
            } else {
                0
            }
        })
        .collect();
    trace
}

/// Simulates `n_sequences` independent pump-probe sequences. Each starts
/// from the 50/50 thermal state; sequence `i` draws from its own
/// substreams of `cfg.seed`, so results do not depend on evaluation order.
pub fn simulate_telegraph(cfg: &TelegraphConfig, n_sequences: usize) -> Result<Vec<TelegraphTrace>> {
    cfg.validate()?;
    Ok((0..n_sequences as u64).map(|i| simulate_one(cfg, i)).collect())
}

/// Sums groups of `factor` bins; a trailing partial group is dropped.
pub fn rebin(trace: &TelegraphTrace, factor: usize) -> Result<TelegraphTrace> {
    if factor == 0 {
        return Err(ReadoutError::InvalidConfig("rebin factor must be at least 1".into()));
    }
    Ok(TelegraphTrace {
        bins: trace.bins.chunks_exact(factor).map(|c| c.iter().sum()).collect(),
        bin_width: trace.bin_width * factor as f64,
        ..trace.clone()
    })
}

/// Shot histogram: entry k is the number of bins with k counts.
pub fn histogram(counts: &[u64]) -> Vec<u64> {
    let n = counts.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut h = vec![0u64; n];
    for &c in counts {
        h[c as usize] += 1;
    }
    h
}

/// P(X ≤ k) for X ~ Poisson(μ).
pub fn poisson_cdf(k: u64, mu: f64) -> f64 {
    if mu <= 0.0 {
        return 1.0;
    }
    gamma_ur(k as f64 + 1.0, mu)
}

/// P(X > k) for X ~ Poisson(μ), accurate in the upper tail.
pub fn poisson_sf(k: u64, mu: f64) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    gamma_lr(k as f64 + 1.0, mu)
}

pub fn poisson_pmf(k: u64, mu: f64) -> f64 {
    if mu <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    PoissonDist::new(mu).map(|d| d.pmf(k)).unwrap_or(0.0)
}

/// ∂P(X ≤ k)/∂μ = −μ^k e^{−μ}/k!.
pub fn poisson_cdf_dmu(k: u64, mu: f64) -> f64 {
    -poisson_pmf(k, mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimodalFit {
    pub mu_down: f64,
    pub sigma_mu_down: f64,
    pub mu_up: f64,
    pub sigma_mu_up: f64,
    /// Mixing weights of the ↓ and ↑ components; a + b = 1.
    pub a: f64,
    pub b: f64,
    pub sigma_a: f64,
    pub n_shots: u64,
    pub iterations: usize,
}

fn mixture_loglik(hist: &[u64], mu1: f64, mu2: f64, w: f64) -> f64 {
    if !(mu1 > 0.0 && mu2 > 0.0 && w > 0.0 && w < 1.0) {
        return f64::NEG_INFINITY;
    }
    hist.iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(k, &n)| {
            let p = w * poisson_pmf(k as u64, mu1) + (1.0 - w) * poisson_pmf(k as u64, mu2);
            n as f64 * p.ln()
        })
        .sum()
}

/// Inverse of the negative log-likelihood Hessian by central differences.
fn ml_covariance(hist: &[u64], p: [f64; 3]) -> Option<nalgebra::Matrix3<f64>> {
    let h = [1e-4 * p[0].max(1e-3), 1e-4 * p[1].max(1e-3), 1e-4 * p[2].min(1.0 - p[2]).max(1e-6)];
    let f = |q: [f64; 3]| mixture_loglik(hist, q[0], q[1], q[2]);
    let mut hess = nalgebra::Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let mut acc = 0.0;
            for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                let mut q = p;
                q[i] += si * h[i];
                q[j] += sj * h[j];
                acc += sign * f(q);
            }
            hess[(i, j)] = acc / (4.0 * h[i] * h[j]);
            hess[(j, i)] = hess[(i, j)];
        }
    }
    (-hess).cholesky().map(|c| c.inverse())
}

/// Maximum-likelihood fit of a two-component Poisson mixture to a shot
/// histogram (expectation maximization, then the observed information for
/// the uncertainties). Components are labelled so that μ↓ < μ↑.
pub fn fit_bimodal(hist: &[u64]) -> Result<BimodalFit> {
    let n_shots: u64 = hist.iter().sum();
    let distinct = hist.iter().filter(|&&n| n > 0).count();
    if distinct < 2 {
        return Err(ReadoutError::InsufficientData("need at least two distinct count values".into()));
    }
    let quantile = |q: f64| {
        let target = q * n_shots as f64;
        let mut acc = 0u64;
        for (k, &n) in hist.iter().enumerate() {
            acc += n;
            if acc as f64 >= target {
                return k as f64;
            }
        }
        (hist.len() - 1) as f64
    };
    let mut mu1 = quantile(0.25).max(0.5);
    let mut mu2 = quantile(0.75).max(mu1 + 0.5);
    let mut w = 0.5;
    let max_iter = 10_000;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let (mut n1, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (k, &n) in hist.iter().enumerate().filter(|(_, &n)| n > 0) {
            let p1 = w * poisson_pmf(k as u64, mu1);
            let p2 = (1.0 - w) * poisson_pmf(k as u64, mu2);
            let tot = p1 + p2;
            let r = if tot > 0.0 { p1 / tot } else if (k as f64 - mu1).abs() < (k as f64 - mu2).abs() { 1.0 } else { 0.0 };
            n1 += n as f64 * r;
            s1 += n as f64 * r * k as f64;
            s2 += n as f64 * (1.0 - r) * k as f64;
        }
        let n2 = n_shots as f64 - n1;
        if n1 <= 0.0 || n2 <= 0.0 {
            return Err(ReadoutError::UnimodalDegenerate { mu_down: mu1, mu_up: mu2 });
        }
        let (m1, m2, nw) = (s1 / n1, s2 / n2, n1 / n_shots as f64);
        let change = ((m1 - mu1).abs() / mu1.max(1e-12))
            .max((m2 - mu2).abs() / mu2.max(1e-12))
            .max((nw - w).abs());
        mu1 = m1;
        mu2 = m2;
        w = nw;
        if change < 1e-12 {
            converged = true;
            break;
        }
    }
    if mu1 > mu2 {
        std::mem::swap(&mut mu1, &mut mu2);
        w = 1.0 - w;
    }
    // Components that merge slow EM down; the separation test applies
    // whether or not the iteration finished.
    let degenerate = ReadoutError::UnimodalDegenerate { mu_down: mu1, mu_up: mu2 };
    let cov = ml_covariance(hist, [mu1, mu2, w]).ok_or(degenerate)?;
    let (s1, s2, sw) = (cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt(), cov[(2, 2)].sqrt());
    if !(mu2 - mu1 > s1.hypot(s2)) {
        return Err(ReadoutError::UnimodalDegenerate { mu_down: mu1, mu_up: mu2 });
    }
    if !converged {
        return Err(ReadoutError::NoConvergence(iterations));
    }
    Ok(BimodalFit {
        mu_down: mu1,
        sigma_mu_down: s1,
        mu_up: mu2,
        sigma_mu_up: s2,
        a: w,
        b: 1.0 - w,
        sigma_a: sw,
        n_shots,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    /// Counts ≤ threshold are read as ↓.
    pub threshold: u64,
    pub fidelity: f64,
    pub sigma: f64,
    pub p_down_given_up: f64,
    pub p_up_given_down: f64,
}

/// F = 1 − ½(p(↓|↑) + p(↑|↓)) with p(↓|↑) = CDF(T, μ↑) and
/// p(↑|↓) = 1 − CDF(T, μ↓); σ_F propagates σ_μ in quadrature.
pub fn fidelity_with_sigmas(mu_down: (f64, f64), mu_up: (f64, f64), threshold: u64) -> FidelityResult {
    let p_du = poisson_cdf(threshold, mu_up.0);
    let p_ud = 1.0 - poisson_cdf(threshold, mu_down.0);
    let d_up = 0.5 * poisson_cdf_dmu(threshold, mu_up.0) * mu_up.1;
    let d_down = 0.5 * poisson_cdf_dmu(threshold, mu_down.0) * mu_down.1;
    FidelityResult {
        threshold,
        fidelity: (1.0 - 0.5 * (p_du + p_ud)).clamp(0.0, 1.0),
        sigma: d_up.hypot(d_down),
        p_down_given_up: p_du.clamp(0.0, 1.0),
        p_up_given_down: p_ud.clamp(0.0, 1.0),
    }
}

pub fn fidelity_at_threshold(mu_down: f64, mu_up: f64, threshold: u64) -> FidelityResult {
    fidelity_with_sigmas((mu_down, 0.0), (mu_up, 0.0), threshold)
}

/// Best integer threshold in [0, ⌈μ↑ + 10√μ↑⌉]; ties go to the smaller
/// threshold.
pub fn optimal_threshold_for(mu_down: (f64, f64), mu_up: (f64, f64)) -> FidelityResult {
    let top = (mu_up.0 + 10.0 * mu_up.0.sqrt()).ceil().max(0.0) as u64;
    let all: Vec<FidelityResult> = (0..=top).map(|t| fidelity_with_sigmas(mu_down, mu_up, t)).collect();
    let best = all.iter().map(|r| r.fidelity).fold(f64::NEG_INFINITY, f64::max);
    *all.iter().find(|r| r.fidelity >= best - 1e-12).expect("nonempty scan")
}

pub fn optimal_threshold(fit: &BimodalFit) -> FidelityResult {
    optimal_threshold_for((fit.mu_down, fit.sigma_mu_down), (fit.mu_up, fit.sigma_mu_up))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub labels: Vec<SpinState>,
    /// Lengths (s) of the runs bounded by label changes on both sides.
    pub intervals: Vec<f64>,
}

/// Labels each bin (↑ when counts > threshold) and returns the dwell
/// times between consecutive label changes. The runs before the first and
/// after the last change are censored and omitted.
pub fn classify_and_intervals(trace: &TelegraphTrace, threshold: u64) -> Classification {
    let labels: Vec<SpinState> =
        trace.bins.iter().map(|&c| if c > threshold { SpinState::Up } else { SpinState::Down }).collect();
    let changes: Vec<usize> = (1..labels.len()).filter(|&i| labels[i] != labels[i - 1]).collect();
    let intervals = changes.windows(2).map(|w| (w[1] - w[0]) as f64 * trace.bin_width).collect();
    Classification { labels, intervals }
}

/// Minimum number of intervals entering the T1 estimate.
pub const MIN_INTERVALS: usize = 20;

/// Exponential fit of a dwell-time histogram with `bin_width` bins.
///
/// Intervals shorter than one bin are unresolvable and always excluded;
/// `drop_first_bin` also excludes the first resolvable bin (one bin width),
/// where false jumps from misclassified single bins accumulate. Above the
/// cut the binned exponential is geometric, so the maximum-likelihood
/// decay per bin is q = m̄/(1 + m̄) with m̄ the mean bin offset, and
/// T1 = −bin_width / ln q.
pub fn estimate_t1_from_intervals(intervals: &[f64], bin_width: f64, drop_first_bin: bool) -> Result<FitResult> {
    if !(bin_width > 0.0) {
        return Err(ReadoutError::InvalidConfig("bin_width must be positive".into()));
    }
    let k_min: u64 = if drop_first_bin { 2 } else { 1 };
    let ks: Vec<u64> = intervals
        .iter()
        .map(|&t| (t / bin_width + 1e-9).floor() as u64)
        .filter(|&k| k >= k_min)
        .collect();
    if ks.len() < MIN_INTERVALS {
        return Err(ReadoutError::InsufficientData(format!(
            "{} intervals above the cut, need {MIN_INTERVALS}",
            ks.len()
        )));
    }
    let n = ks.len() as f64;
    let mean = ks.iter().map(|&k| (k - k_min) as f64).sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(ReadoutError::InsufficientData("all intervals fall in one bin".into()));
    }
    let q = mean / (1.0 + mean);
    let sigma_q = (1.0 - q) * (q / n).sqrt();
    let lq = q.ln();
    let t1 = -bin_width / lq;
    let sigma_t1 = bin_width / (q * lq * lq) * sigma_q;

    // Pearson χ² of the histogram against the fitted geometric law.
    let k_max = *ks.iter().max().expect("nonempty");
    let mut hist = vec![0u64; (k_max - k_min + 1) as usize];
    for &k in &ks {
        hist[(k - k_min) as usize] += 1;
    }
    let (mut chi2, mut used) = (0.0, 0usize);
    for (j, &obs) in hist.iter().enumerate() {
        let expect = n * (1.0 - q) * q.powi(j as i32);
        if expect >= 5.0 {
            chi2 += (obs as f64 - expect).powi(2) / expect;
            used += 1;
        }
    }
    let dof = used.saturating_sub(1).max(1);
    Ok(FitResult {
        names: vec!["t1".into()],
        values: vec![t1],
        sigmas: vec![sigma_t1],
        covariance: vec![vec![sigma_t1 * sigma_t1]],
        chi2_reduced: chi2 / dof as f64,
        converged: true,
        iterations: 1,
        derived: vec![crate::fitting::DerivedValue { name: "n_intervals".into(), value: n, sigma: 0.0 }],
        degenerate: false,
    })
}

/// Mean probe counts per bin across sequences with their standard errors,
/// as `(t from probe start, mean, σ)` for fitting the recovery after pumping.
pub fn pump_probe_recovery(traces: &[TelegraphTrace]) -> Result<Vec<(f64, f64, f64)>> {
    let n = traces.len();
    if n < 2 {
        return Err(ReadoutError::InsufficientData("need at least two sequences".into()));
    }
    let bins = traces.iter().map(|t| t.bins.len()).min().unwrap_or(0);
    let bw = traces[0].bin_width;
    Ok((0..bins)
        .map(|i| {
            let vals: Vec<f64> = traces.iter().map(|t| t.bins[i] as f64).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            ((i as f64 + 0.5) * bw, mean, (var / n as f64).sqrt().max(1e-12))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> TelegraphConfig {
        TelegraphConfig {
            t1: 419e-6,
            pump_rate: 0.0,
            mu_down: 21.9 / 4.0,
            mu_up: 41.3 / 4.0,
            bin_width: 20e-6,
            pump_duration: 0.0,
            probe_duration: 20e-3,
            seed: 11,
        }
    }

    #[test]
    fn fidelity_examples() {
        let r = fidelity_at_threshold(21.9, 41.3, 30);
        assert!((r.fidelity - 0.960).abs() < 0.003, "{}", r.fidelity);
        for t in [0, 5, 20, 40, 100] {
            assert_relative_eq!(fidelity_at_threshold(25.0, 25.0, t).fidelity, 0.5, epsilon = 1e-12);
        }
        let lim = fidelity_at_threshold(21.9, 1e4, 30).fidelity;
        assert_relative_eq!(lim, 1.0 - (1.0 - poisson_cdf(30, 21.9)) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn optimal_threshold_examples() {
        let r = optimal_threshold_for((21.9, 0.2), (41.3, 0.2));
        assert_eq!(r.threshold, 30);
        assert!(r.sigma > 0.0 && r.sigma < 0.004);
        assert_eq!(optimal_threshold_for((25.0, 0.0), (25.0, 0.0)).threshold, 0);
    }

    #[test]
    fn rebin_examples() {
        let tr = simulate_telegraph(&cfg(), 1).unwrap().remove(0);
        assert_eq!(rebin(&tr, 1).unwrap(), tr);
        let r4 = rebin(&tr, 4).unwrap();
        assert_relative_eq!(r4.bin_width, 80e-6);
        assert_eq!(r4.bins.len(), tr.bins.len() / 4);
        let kept: u64 = tr.bins[..r4.bins.len() * 4].iter().sum();
        assert_eq!(r4.bins.iter().sum::<u64>(), kept);
        assert_eq!(r4.bins[0], tr.bins[..4].iter().sum::<u64>());
        assert!(rebin(&tr, 0).is_err());
    }

    #[test]
    fn classification_examples() {
        let mut tr = simulate_telegraph(&cfg(), 1).unwrap().remove(0);
        tr.bins = vec![50; 100];
        assert!(classify_and_intervals(&tr, 30).intervals.is_empty());
        tr.bins = (0..100).map(|i| if i % 2 == 0 { 10 } else { 50 }).collect();
        let c = classify_and_intervals(&tr, 30);
        assert_eq!(c.intervals.len(), 98);
        assert!(c.intervals.iter().all(|&t| (t - tr.bin_width).abs() < 1e-15));
    }

    #[test]
    fn interval_estimator_rejects_censored_data() {
        let short = vec![30e-6; 100];
        assert!(matches!(
            estimate_t1_from_intervals(&short, 80e-6, false),
            Err(ReadoutError::InsufficientData(_))
        ));
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = simulate_telegraph(&cfg(), 3).unwrap();
        let b = simulate_telegraph(&cfg(), 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_telegraph(&TelegraphConfig { seed: 12, ..cfg() }, 3).unwrap();
        assert_ne!(a, c);
        let five = simulate_telegraph(&cfg(), 5).unwrap();
        assert_eq!(&five[..3], &a[..]);
    }
}
