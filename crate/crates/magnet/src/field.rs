//! Closed-form field of a uniformly, axially magnetized cylinder.
//!
//! The magnet is equivalent to a solenoid sheet with surface current
//! M = B_r/µ0. In the magnet frame (ρ, z measured from the center, radius
//! a, half-length b) with z± = z ± b:
//!
//!   B_ρ = (B_r/π)[α₊ cel(k₊, 1, 1, −1) − α₋ cel(k₋, 1, 1, −1)]
//!   B_z = (B_r/π)·a/(a + ρ)·[β₊ cel(k₊, γ², 1, γ) − β₋ cel(k₋, γ², 1, γ)]
//!
//! with α± = a/√(z±² + (ρ + a)²), β± = z± α±/a, γ = (a − ρ)/(a + ρ) and
//! k± = √((z±² + (a − ρ)²)/(z±² + (a + ρ)²)).

use serde::{Deserialize, Serialize};

use crate::elliptic::cel;
use crate::{MagnetError, Vec3};

/// Typical remanence of sintered SmCo (T).
pub const SMCO_BR: f64 = 1.1;
/// Typical remanence of sintered NdFeB (T).
pub const NDFEB_BR: f64 = 1.3;
/// Vacuum permeability (T·m/A).
pub const MU0: f64 = 4e-7 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylMagnet {
    pub diameter: f64,
    pub thickness: f64,
    pub remanence_br: f64,
    pub center: [f64; 3],
    /// Magnetization direction; normalized on use.
    pub axis: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub b: Vec3,
    /// The point lies inside at least one magnet body, where the result is
    /// the H-field-free B of the equivalent current sheet.
    pub inside: bool,
}

impl CylMagnet {
    pub fn new(diameter: f64, thickness: f64, remanence_br: f64, center: Vec3, axis: Vec3) -> Result<Self, MagnetError> {
        let m = Self { diameter, thickness, remanence_br, center: center.into(), axis: axis.into() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MagnetError> {
        if !(self.diameter > 0.0 && self.thickness > 0.0 && self.remanence_br > 0.0) {
            return Err(MagnetError::InvalidInput("dimensions and remanence must be positive".into()));
        }
        let n = Vec3::from(self.axis).norm();
        if !(n > 0.0) || !n.is_finite() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(MagnetError::InvalidInput("axis must be a nonzero finite vector".into()));
        }
        Ok(())
    }

    pub fn axis_unit(&self) -> Vec3 {
        Vec3::from(self.axis).normalize()
    }

    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * 0.25 * self.diameter * self.diameter * self.thickness
    }

    /// Magnetic dipole moment Br·V/µ0 along the axis (A·m²).
    pub fn moment(&self) -> Vec3 {
        self.axis_unit() * (self.remanence_br * self.volume() / MU0)
    }

    /// Cylindrical coordinates (ρ, z) of `p` in the magnet frame and the
    /// radial unit vector (zero on the axis).
    fn local(&self, p: &Vec3) -> (f64, f64, Vec3) {
        let ax = self.axis_unit();
        let d = p - Vec3::from(self.center);
        let z = d.dot(&ax);
        let radial = d - ax * z;
        let rho = radial.norm();
        let rhat = if rho > 0.0 { radial / rho } else { Vec3::zeros() };
        (rho, z, rhat)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let (rho, z, _) = self.local(p);
        rho < 0.5 * self.diameter && z.abs() < 0.5 * self.thickness
    }

    /// Field (T) at `p`.
    pub fn field(&self, p: &Vec3) -> Result<Vec3, MagnetError> {
        let (rho, z, rhat) = self.local(p);
        let (b_rho, b_z) = cylinder_field(0.5 * self.diameter, 0.5 * self.thickness, self.remanence_br, rho, z)?;
        Ok(self.axis_unit() * b_z + rhat * b_rho)
    }
}

/// (B_ρ, B_z) in the magnet frame.
pub fn cylinder_field(a: f64, b: f64, br: f64, rho: f64, z: f64) -> Result<(f64, f64), MagnetError> {
    let b0 = br / std::f64::consts::PI;
    let gamma = (a - rho) / (a + rho);
    let mut b_rho = 0.0;
    let mut b_z = 0.0;
    for (sign, zs) in [(1.0, z + b), (-1.0, z - b)] {
        let denom = (zs * zs + (a + rho) * (a + rho)).sqrt();
        let alpha = a / denom;
        let beta = zs / denom;
        let kc = ((zs * zs + (a - rho) * (a - rho)) / (zs * zs + (a + rho) * (a + rho))).sqrt();
        if rho > 0.0 {
            b_rho += sign * alpha * cel(kc, 1.0, 1.0, -1.0).ok_or(MagnetError::SingularEvaluation)?;
        }
        b_z += sign * beta * cel(kc, gamma * gamma, 1.0, gamma).ok_or(MagnetError::SingularEvaluation)?;
    }
    Ok((b0 * b_rho, b0 * a / (a + rho) * b_z))
}

/// Superposed field of `magnets` at `point`.
pub fn field_at(magnets: &[CylMagnet], point: &Vec3) -> Result<FieldSample, MagnetError> {
    let mut b = Vec3::zeros();
    let mut inside = false;
    for m in magnets {
        m.validate()?;
        b += m.field(point)?;
        inside |= m.contains(point);
    }
    Ok(FieldSample { b, inside })
}

/// Point-dipole field of moment `m` (A·m²) at offset `r` (m).
pub fn dipole_field(m: &Vec3, r: &Vec3) -> Vec3 {
    let d = r.norm();
    let rhat = r / d;
    (rhat * (3.0 * m.dot(&rhat)) - m) * (MU0 / (4.0 * std::f64::consts::PI * d.powi(3)))
}
