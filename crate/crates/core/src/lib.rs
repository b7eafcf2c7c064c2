//! Modeling and analysis toolkit for cavity-QED spin-photon interfaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: rate conventions, the coupled cavity-emitter system and
//!   closed-form figures of merit.
//! * [`scattering`]: steady-state input-output amplitudes and thermal averaging.
//! * [`loss_budget`]: coupled-mode decomposition of quality factors.
//! * [`spectra`]: forward synthesis of measurement-like spectra with shot noise.
//! * [`fitting`]: weighted least-squares fits and estimate pooling.
//! * [`readout`]: spin quantum-jump simulation and single-shot readout analysis.

pub mod fitting;
pub mod loss_budget;
pub mod model;
pub mod readout;
pub mod rng;
pub mod scattering;
pub mod spectra;

pub use model::{CavityMode, CoupledSystem, EmitterParams, RateSet};
