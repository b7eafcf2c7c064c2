//! Fields of axially magnetized cylindrical permanent magnets and the
//! alignment of that field to SiV symmetry axes.

pub mod crystal;
pub mod elliptic;
pub mod field;
pub mod mount;

use thiserror::Error;

pub use crystal::{misalignment_deg, CrystalFrame};
pub use field::{field_at, CylMagnet, FieldSample};
pub use mount::{calibrate_mount, external_sweep, MountCalibration, SweepMap, SweepPoint};

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error)]
pub enum MagnetError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("field is singular on the rim of a magnet")]
    SingularEvaluation,
    #[error("field vanishes; the angle is undefined")]
    ZeroField,
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
