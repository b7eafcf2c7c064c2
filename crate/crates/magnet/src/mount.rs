//! Sample-mount calibration and external-magnet alignment maps.
//!
//! Lab frame: origin at the mount magnet center, magnet axis along ẑ,
//! sample surface in a plane z = h above it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::crystal::misalignment_deg;
use crate::field::{field_at, CylMagnet};
use crate::{MagnetError, Vec3};

/// Mount magnet: 6.35 mm × 3.2 mm SmCo.
pub const MOUNT_DIAMETER: f64 = 6.35e-3;
pub const MOUNT_THICKNESS: f64 = 3.2e-3;
/// External magnet: 4 cm × 3.6 cm NdFeB.
pub const EXTERNAL_DIAMETER: f64 = 4e-2;
pub const EXTERNAL_THICKNESS: f64 = 3.6e-2;
/// Field magnitude at the intended device position (T).
pub const TARGET_FIELD: f64 = 0.26;
/// Intended and actual in-plane device positions (m).
pub const IDEAL_POSITION: [f64; 2] = [3.0e-3, 0.0];
pub const MEASURED_POSITION: [f64; 2] = [3.014e-3, 0.190e-3];
/// External-magnet stand-off along x (m). A value of 5.7 cm is also quoted
/// for the same geometry.
pub const EXTERNAL_STANDOFF: f64 = 5.5e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountCalibration {
    /// Mount magnet with calibrated remanence.
    pub mount: CylMagnet,
    /// Height of the sample surface above the magnet center (m).
    pub sample_height: f64,
    /// Residual misalignment at the intended position (deg).
    pub residual_alpha_deg: f64,
}

impl MountCalibration {
    pub fn sample_point(&self, xy: [f64; 2]) -> Vec3 {
        Vec3::new(xy[0], xy[1], self.sample_height)
    }
}

fn alpha_at(m: &CylMagnet, p: &Vec3, axis: &Vec3) -> f64 {
    match field_at(std::slice::from_ref(m), p) {
        Ok(s) => misalignment_deg(&s.b, axis).unwrap_or(90.0),
        Err(_) => 90.0,
    }
}

/// Places the sample plane at the height where the mount field at the
/// intended position `ideal_xy` is best aligned with `axis`, then scales
/// the remanence so that |B| = `target_field` there.
pub fn calibrate_mount(
    template: &CylMagnet,
    ideal_xy: [f64; 2],
    target_field: f64,
    axis: &Vec3,
) -> Result<MountCalibration, MagnetError> {
    template.validate()?;
    if !(target_field > 0.0) {
        return Err(MagnetError::InvalidInput("target field must be positive".into()));
    }
    let mut m = *template;
    m.center = [0.0, 0.0, 0.0];
    m.axis = [0.0, 0.0, 1.0];
    let top = 0.5 * m.thickness;
    let span = 5.0 * m.diameter;
    let f = |h: f64| alpha_at(&m, &Vec3::new(ideal_xy[0], ideal_xy[1], h), axis);

    // Coarse scan above the top face, then golden-section refinement.
    let n = 4000;
    let hs: Vec<f64> = (1..=n).map(|i| top + span * i as f64 / n as f64).collect();
    let (i_best, _) = hs
        .iter()
        .map(|h| f(*h))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty scan");
    let (mut lo, mut hi) = (hs[i_best.saturating_sub(1)], hs[(i_best + 1).min(n - 1)]);
    if i_best == 0 {
        lo = top + 1e-9;
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let h = 0.5 * (lo + hi);
    let residual = f(h);
    let p = Vec3::new(ideal_xy[0], ideal_xy[1], h);
    let b = field_at(std::slice::from_ref(&m), &p)?.b.norm();
    if !(b > 0.0) {
        return Err(MagnetError::Calibration("no field at the sample".into()));
    }
    m.remanence_br *= target_field / b;
    Ok(MountCalibration { mount: m, sample_height: h, residual_alpha_deg: residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub y: f64,
    pub z: f64,
    pub alpha_deg: f64,
    pub b_tesla: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMap {
    pub points: Vec<SweepPoint>,
    pub argmin: usize,
    /// Misalignment with the mount magnet alone.
    pub mount_only_alpha_deg: f64,
    pub mount_only_b_tesla: f64,
}

impl SweepMap {
    pub fn best(&self) -> &SweepPoint {
        &self.points[self.argmin]
    }

    /// Largest α among map points within `radius` (in y and z) of the
    /// optimum.
    pub fn worst_near_best(&self, radius: f64) -> f64 {
        let b = self.best();
        self.points
            .iter()
            .filter(|p| (p.y - b.y).abs() <= radius && (p.z - b.z).abs() <= radius)
            .map(|p| p.alpha_deg)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with header `y_m,z_m,alpha_deg,b_tesla`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MagnetError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["y_m", "z_m", "alpha_deg", "b_tesla"])?;
        for p in &self.points {
            wtr.write_record(&[format!("{:e}", p.y), format!("{:e}", p.z), format!("{:e}", p.alpha_deg), format!("{:e}", p.b_tesla)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// α and |B| at `sample` with the external magnet centered at
/// (x_ext, y, z) for every (y, z) on the grid, where x_ext is taken from
/// the template center.
pub fn external_sweep(
    mount: &CylMagnet,
    external: &CylMagnet,
    ys: &[f64],
    zs: &[f64],
    sample: &Vec3,
    axis: &Vec3,
) -> Result<SweepMap, MagnetError> {
    if ys.is_empty() || zs.is_empty() {
        return Err(MagnetError::InvalidInput("sweep grid is empty".into()));
    }
    let base = field_at(std::slice::from_ref(mount), sample)?.b;
    let mount_only_alpha_deg = misalignment_deg(&base, axis)?;
    let mut points = Vec::with_capacity(ys.len() * zs.len());
    for &y in ys {
        for &z in zs {
            let mut ext = *external;
            ext.center = [external.center[0], y, z];
            let b = base + field_at(std::slice::from_ref(&ext), sample)?.b;
            points.push(SweepPoint { y, z, alpha_deg: misalignment_deg(&b, axis)?, b_tesla: b.norm() });
        }
    }
    let argmin = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.alpha_deg.total_cmp(&b.1.alpha_deg))
        .map(|(i, _)| i)
        .expect("nonempty grid");
    Ok(SweepMap { points, argmin, mount_only_alpha_deg, mount_only_b_tesla: base.norm() })
}

/// Evenly spaced grid of `n` values on [lo, hi].
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
