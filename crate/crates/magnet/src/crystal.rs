//! Diamond crystal axes in the lab frame.
//!
//! The sample surface is (001) with lab ẑ = [001]. The cavity runs along
//! [110], which is lab ŷ; lab x̂ = [1̄10]/√2 completes a right-handed frame,
//! so ŷ = [1̄1̄0]/√2. The [1̄11] and [11̄1] SiV orientations are transverse
//! to the cavity and couple to its TE mode.

use serde::Serialize;

use crate::{MagnetError, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SivAxis {
    pub label: &'static str,
    pub direction: [f64; 3],
    pub cavity_coupled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrystalFrame {
    /// In-plane ⟨110⟩ directions along the cavity and across it.
    pub edge_axes: [[f64; 3]; 2],
    pub siv_axes: [SivAxis; 4],
    /// Rotation of the sample about ẑ (rad).
    pub rotation: f64,
}

impl CrystalFrame {
    /// Frame with the sample rotated by `rotation` (rad) about the surface
    /// normal.
    pub fn rotated(rotation: f64) -> Self {
        let (s, c) = rotation.sin_cos();
        let r2 = std::f64::consts::SQRT_2;
        // Crystal Miller indices → lab, then rotate about ẑ.
        let lab = |v: [f64; 3]| -> [f64; 3] {
            let x = (-v[0] + v[1]) / r2;
            let y = (-v[0] - v[1]) / r2;
            let n = Vec3::from(v).norm();
            [(c * x - s * y) / n, (s * x + c * y) / n, v[2] / n]
        };
        let axis = |label, v, cavity_coupled| SivAxis { label, direction: lab(v), cavity_coupled };
        Self {
            edge_axes: [lab([1.0, 1.0, 0.0]), lab([-1.0, 1.0, 0.0])],
            siv_axes: [
                axis("[-111]", [-1.0, 1.0, 1.0], true),
                axis("[1-11]", [1.0, -1.0, 1.0], true),
                axis("[111]", [1.0, 1.0, 1.0], false),
                axis("[-1-11]", [-1.0, -1.0, 1.0], false),
            ],
            rotation,
        }
    }

    pub fn axis(&self, label: &str) -> Option<Vec3> {
        self.siv_axes.iter().find(|a| a.label == label).map(|a| Vec3::from(a.direction))
    }

    /// The [1̄11] axis, (√2, 0, 1)/√3 for an unrotated sample.
    pub fn primary(&self) -> Vec3 {
        Vec3::from(self.siv_axes[0].direction)
    }
}

impl Default for CrystalFrame {
    fn default() -> Self {
        Self::rotated(0.0)
    }
}

/// Angle between the field and an SiV axis in degrees, insensitive to the
/// sign of either vector.
pub fn misalignment_deg(b: &Vec3, axis: &Vec3) -> Result<f64, MagnetError> {
    let (nb, na) = (b.norm(), axis.norm());
    if !(nb > 0.0) {
        return Err(MagnetError::ZeroField);
    }
    if !(na > 0.0) {
        return Err(MagnetError::InvalidInput("axis must be nonzero".into()));
    }
    // atan2 keeps precision near 0° where acos does not.
    let dot = b.dot(axis).abs();
    let cross = b.cross(axis).norm();
    Ok(cross.atan2(dot).to_degrees())
}
