use std::path::Path;

use cqed_magnet::mount::linspace;
use cqed_magnet::{calibrate_mount, external_sweep, field_at, misalignment_deg, CrystalFrame, CylMagnet, MagnetError, Vec3};
use serde_json::json;

use super::Artifacts;
use crate::config::MagnetConfig;
use crate::{CliError, Outputs};

pub fn run(cfg: &MagnetConfig, _seed: u64, _base: &Path, out: &Path) -> Result<Outputs, CliError> {
    let m = &cfg.mount;
    let frame = CrystalFrame::rotated(cfg.rotation_deg.to_radians());
    let axis = frame
        .axis(&cfg.siv_axis)
        .ok_or_else(|| CliError::Config(format!("unknown SiV axis {:?}", cfg.siv_axis)))?;
    let template = CylMagnet::new(m.diameter_m, m.thickness_m, m.remanence_t, Vec3::zeros(), Vec3::z())?;
    let (mount, height, residual) = if m.calibrate {
        let c = calibrate_mount(&template, m.ideal_position_m, m.target_field_t, &axis)?;
        (c.mount, c.sample_height, Some(c.residual_alpha_deg))
    } else {
        let h = m
            .sample_height_m
            .ok_or_else(|| CliError::Config("`mount.sample_height_m` is required without calibration".into()))?;
        (template, h, None)
    };
    let sample = Vec3::new(cfg.sample_position_m[0], cfg.sample_position_m[1], height);
    let b = field_at(std::slice::from_ref(&mount), &sample)?;
    if b.inside {
        return Err(MagnetError::InvalidInput("sample point lies inside the mount magnet".into()).into());
    }
    let alpha = misalignment_deg(&b.b, &axis)?;

    let mut art = Artifacts::new(out);
    let mut report = json!({
        "siv_axis": cfg.siv_axis,
        "axis": [axis.x, axis.y, axis.z],
        "mount": mount,
        "sample_height_m": height,
        "calibration_residual_alpha_deg": residual,
        "sample_point_m": [sample.x, sample.y, sample.z],
        "mount_only_alpha_deg": alpha,
        "mount_only_b_tesla": b.b.norm(),
        "mount_only_b_vector_t": [b.b.x, b.b.y, b.b.z],
    });
    if let Some(e) = &cfg.external {
        let ext = CylMagnet::new(
            e.diameter_m,
            e.thickness_m,
            e.remanence_t,
            Vec3::new(e.standoff_m, 0.0, 0.0),
            Vec3::from(e.axis),
        )?;
        let ys = linspace(e.y_range_m[0], e.y_range_m[1], e.points);
        let zs = linspace(e.z_range_m[0], e.z_range_m[1], e.points);
        let map = external_sweep(&mount, &ext, &ys, &zs, &sample, &axis)?;
        map.write_csv(std::fs::File::create(art.path("alpha_map.csv"))?)?;
        let best = map.best();
        report["external"] = json!({
            "magnet": ext,
            "best": best,
            "worst_within_2mm_deg": map.worst_near_best(2e-3),
        });
    }
    art.json("magnet.json", &report)?;
    let summary = json!({
        "mount_only_alpha_deg": alpha,
        "mount_only_b_tesla": b.b.norm(),
        "best_alpha_deg": report["external"]["best"]["alpha_deg"],
    });
    Ok(Outputs { files: art.files, summary })
}
