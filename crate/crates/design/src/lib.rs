//! Nanobeam cavity geometry and inverse-design search.
//!
//! Geometry generators produce the chirped photonic-crystal lattice, the
//! coupling-sweep device grid and the elliptical grating-coupler arcs. The
//! search combines LIPO global optimization with a derivative-free trust
//! region over any [`objective::Objective`].

pub mod geometry;
pub mod lipo;
pub mod objective;
pub mod param_box;
pub mod search;
pub mod trust_region;

use thiserror::Error;

pub use lipo::{lipo_maximize, EvalLog, LipoResult, LogEntry, Source};
pub use objective::{Evaluation, Objective, ObjectiveSpec};
pub use param_box::ParamBox;
pub use search::{interleaved_search, RankedDesign, Schedule, SearchOptions, SearchResult};
pub use trust_region::{trust_region_refine, TrustRegionResult};

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("external objective: {0}")]
    External(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
