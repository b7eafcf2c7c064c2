use std::path::{Path, PathBuf};
use std::process::Command;

use cqed_core::fitting::{default_reject, fit_dit, pool, DitFixed, FitResult, ScanEstimate};
use cqed_core::loss_budget::QBudget;
use cqed_core::model::{cooperativity, CoupledSystem, RateSet};
use cqed_core::scattering::{dark_spectra, DriveGrid, Geometry};
use cqed_core::spectra::{dit_intensity, sample_counts, DitModel, SampledSpectrum};
use cqed_magnet::mount::{IDEAL_POSITION, MEASURED_POSITION, MOUNT_DIAMETER, MOUNT_THICKNESS, TARGET_FIELD};
use cqed_magnet::{calibrate_mount, field_at, misalignment_deg, CrystalFrame, CylMagnet, Vec3};
use serde_json::{json, Value};
use tempfile::TempDir;

const GHZ: f64 = 1e9;
const F_CAV: f64 = 406.77e12;
const KAPPA: f64 = 114.9e9;

fn cqed(verb: &str, cfg: &Value, dir: &Path, extra: &[&str]) -> (i32, PathBuf) {
    let cfg_path = dir.join(format!("{verb}.json"));
    std::fs::write(&cfg_path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    run_raw(verb, &cfg_path, dir, extra)
}

fn run_raw(verb: &str, cfg_path: &Path, dir: &Path, extra: &[&str]) -> (i32, PathBuf) {
    let out = dir.join(format!("out-{verb}-{}", extra.join("")));
    let status = Command::new(env!("CARGO_BIN_EXE_cqed"))
        .arg(verb)
        .arg("--config")
        .arg(cfg_path)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .status()
        .unwrap();
    (status.code().unwrap(), out)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn read_rows(p: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect()
}

fn siv1_rates() -> RateSet {
    RateSet {
        f_cav: F_CAV,
        f_emitter: F_CAV + 0.523 * GHZ,
        kappa_i: 0.0,
        kappa_c: KAPPA / 2.0,
        gamma: 0.110 * GHZ,
        gamma_d: 0.0,
        g: 2.13 * GHZ,
        delta_e: 50.0 * GHZ,
    }
}

fn rates_json(r: &RateSet) -> Value {
    json!({
        "f_cav_hz": r.f_cav, "f_emitter_hz": r.f_emitter, "kappa_i_hz": r.kappa_i, "kappa_c_hz": r.kappa_c,
        "gamma_hz": r.gamma, "gamma_d_hz": r.gamma_d, "g_hz": r.g, "delta_e_hz": r.delta_e,
    })
}

fn spectrum_cfg(r: &RateSet) -> Value {
    json!({
        "geometry": "drop",
        "rates": rates_json(r),
        "detuning_start_hz": -10.0 * GHZ,
        "detuning_stop_hz": 10.0 * GHZ,
        "points": 401,
    })
}

fn lib_model(r: RateSet) -> DitModel {
    DitModel {
        sys: CoupledSystem::new(r, 4.0).unwrap(),
        geometry: Geometry::Drop,
        bg_ratio: [0.0; 3],
        fp: [1.0, 0.0, 0.0],
        thermal: false,
    }
}

#[test]
fn spectrum_minimum_matches_library() {
    let dir = TempDir::new().unwrap();
    let (code, out) = cqed("spectrum", &spectrum_cfg(&siv1_rates()), dir.path(), &[]);
    assert_eq!(code, 0);
    let rows = read_rows(&out.join("spectrum.csv"));
    let grid = DriveGrid::linspace(-10.0 * GHZ, 10.0 * GHZ, 401).unwrap();
    let lib = dit_intensity(&lib_model(siv1_rates()), &grid).unwrap();
    assert_eq!(rows.len(), lib.len());
    // DIT window: within a few emitter linewidths of Δ.
    let in_window = |d: f64| (d - 0.523 * GHZ).abs() <= 0.5 * GHZ;
    let cli_min = rows.iter().filter(|r| in_window(r[0])).map(|r| r[2]).fold(f64::INFINITY, f64::min);
    let lib_min = grid
        .detunings()
        .iter()
        .zip(&lib)
        .filter(|(d, _)| in_window(**d))
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(cli_min, lib_min);
    for (row, (d, v)) in rows.iter().zip(grid.detunings().iter().zip(&lib)) {
        assert_eq!(row[0], *d);
        assert_eq!(row[1], F_CAV + d);
        assert_eq!(row[2], *v);
    }
}

#[test]
fn uncoupled_spectrum_is_the_dark_cavity() {
    let dir = TempDir::new().unwrap();
    let r = RateSet { g: 0.0, ..siv1_rates() };
    let (code, out) = cqed("spectrum", &spectrum_cfg(&r), dir.path(), &[]);
    assert_eq!(code, 0);
    let grid = DriveGrid::linspace(-10.0 * GHZ, 10.0 * GHZ, 401).unwrap();
    let dark = dark_spectra(&CoupledSystem::new(r, 4.0).unwrap(), &grid, Geometry::Drop).unwrap().intensity();
    for (row, want) in read_rows(&out.join("spectrum.csv")).iter().zip(&dark) {
        assert!((row[2] - want).abs() <= 1e-12 * want.abs().max(1e-12), "{} vs {want}", row[2]);
    }
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = TempDir::new().unwrap();
    let mut cfg = spectrum_cfg(&siv1_rates());
    cfg["noise"] = json!({ "peak_rate_cps": 2e4, "exposure_s": 1.0 });
    let (_, a) = cqed("spectrum", &cfg, dir.path(), &["--seed", "11"]);
    let (_, a2) = {
        let d2 = dir.path().join("again");
        std::fs::create_dir_all(&d2).unwrap();
        cqed("spectrum", &cfg, &d2, &["--seed", "11"])
    };
    let (_, b) = cqed("spectrum", &cfg, dir.path(), &["--seed", "12"]);
    let bytes = |p: &Path, f: &str| std::fs::read(p.join(f)).unwrap();
    for f in ["spectrum.csv", "sample.csv", "sample.json"] {
        assert_eq!(bytes(&a, f), bytes(&a2, f), "{f}");
    }
    assert_ne!(bytes(&a, "sample.csv"), bytes(&b, "sample.csv"));
    assert_eq!(read_json(&a.join("run.json"))["seed"], 11);
}

#[test]
fn optimize_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "objective": { "kind": "multi_bump", "dim": 3, "landscape_seed": 4 },
        "global_budget": 60, "local_budget": 60, "n_clusters": 2, "seed": 3,
    });
    let (c1, a) = cqed("optimize", &cfg, dir.path(), &[]);
    let (c2, b) = cqed("optimize", &cfg, dir.path(), &["--seed", "3"]);
    assert_eq!((c1, c2), (0, 0));
    for f in ["designs.json", "evaluations.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report = read_json(&a.join("designs.json"));
    assert_eq!(report["replay_violations"], json!([]));
    assert!(report["evaluations"].as_u64().unwrap() <= 120);
    let header = std::fs::read_to_string(a.join("evaluations.csv")).unwrap();
    assert!(header.starts_with("eval_index,x0,x1,x2,score"), "{header}");
}

fn golden_truth() -> DitModel {
    DitModel { bg_ratio: [0.02, 0.0, 0.0], fp: [3e4, 0.0, 0.0], ..lib_model(siv1_rates()) }
}

fn golden_grid() -> DriveGrid {
    DriveGrid::linspace(0.523 * GHZ - 6.0 * GHZ, 0.523 * GHZ + 6.0 * GHZ, 241).unwrap()
}

fn synth(m: &DitModel, seed: u64) -> SampledSpectrum {
    let grid = golden_grid();
    let y = dit_intensity(m, &grid).unwrap();
    let freqs: Vec<f64> = grid.detunings().iter().map(|d| F_CAV + d).collect();
    sample_counts(&freqs, &y, 1.0, seed).unwrap()
}

fn dit_fit_cfg(inputs: Vec<String>) -> Value {
    json!({
        "model": "dit",
        "inputs": inputs,
        "cavity": { "f_cav_hz": F_CAV, "kappa_hz": KAPPA, "background_ratio": [0.02, 0.0, 0.0] },
        "emitter": { "detuning_hz": 0.6 * GHZ, "g_hz": 1.7 * GHZ, "gamma_hz": 0.15 * GHZ },
    })
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Regenerate with `CQED_WRITE_GOLDEN=1 cargo test -p cqed-cli --test cli`.
#[test]
fn golden_dataset_refits_to_reference() {
    let csv_path = fixtures().join("dit_golden.csv");
    let ref_path = fixtures().join("dit_golden_reference.json");
    let truth = golden_truth();
    if std::env::var_os("CQED_WRITE_GOLDEN").is_some() {
        let spec = synth(&truth, 2024);
        spec.save_csv(&csv_path).unwrap();
        let fixed = DitFixed { f_cav: F_CAV, kappa: KAPPA, bg_ratio: truth.bg_ratio };
        let mut init = truth;
        let mut r = init.sys.rates;
        r.g *= 0.8;
        r.gamma *= 1.4;
        init.sys = init.sys.with_rates(r);
        let fit = fit_dit(&spec, &fixed, &init).unwrap();
        std::fs::write(&ref_path, fit.to_json().unwrap()).unwrap();
    }
    let reference = FitResult::from_json(&std::fs::read_to_string(&ref_path).unwrap()).unwrap();
    // The stored reference itself sits near the generating truth.
    let t = truth.sys.rates;
    for (name, want) in [("g", t.g), ("gamma", t.gamma), ("delta", t.detuning())] {
        let (v, s) = reference.get(name).unwrap();
        assert!((v - want).abs() < 4.0 * s, "{name}: reference {v} ± {s} vs truth {want}");
    }

    let dir = TempDir::new().unwrap();
    let (code, out) = cqed("fit", &dit_fit_cfg(vec![csv_path.display().to_string()]), dir.path(), &[]);
    assert_eq!(code, 0);
    let report = read_json(&out.join("fits.json"));
    let fit: FitResult = serde_json::from_value(report["scans"][0]["fit"].clone()).unwrap();
    for name in ["g", "gamma", "delta", "cooperativity"] {
        let (v, _) = fit.get(name).unwrap();
        let (want, sigma) = reference.get(name).unwrap();
        assert!((v - want).abs() <= sigma, "{name}: {v} vs {want} ± {sigma}");
    }
}

#[test]
fn pooling_forty_scans_matches_library_pool() {
    let dir = TempDir::new().unwrap();
    let truth = golden_truth();
    let mut inputs = Vec::new();
    for seed in 0..40 {
        let name = format!("scan{seed:02}.csv");
        synth(&truth, 300 + seed).save_csv(&dir.path().join(&name)).unwrap();
        inputs.push(name);
    }
    let (code, out) = cqed("fit", &dit_fit_cfg(inputs), dir.path(), &[]);
    assert_eq!(code, 0);
    let report = read_json(&out.join("fits.json"));
    let scans = report["scans"].as_array().unwrap();
    assert_eq!(scans.len(), 40);
    let est: Vec<ScanEstimate> = scans
        .iter()
        .filter(|s| !s["fit"].is_null())
        .map(|s| serde_json::from_value::<FitResult>(s["fit"].clone()).unwrap().estimate("cooperativity").unwrap())
        .collect();
    let want = pool(&est, default_reject).unwrap();
    let got = &report["pooled"]["cooperativity"]["estimate"];
    assert_eq!(got["mean"].as_f64().unwrap(), want.mean);
    assert_eq!(got["sigma"].as_f64().unwrap(), want.sigma);
    assert_eq!(got["n_used"].as_u64().unwrap() as usize, want.n_used);
    let c_true = cooperativity(&truth.sys.rates).unwrap();
    assert!((want.mean - c_true).abs() < 0.05, "{} vs {c_true}", want.mean);
    let rows = read_rows_raw(&out.join("fits.csv"));
    assert_eq!(rows.len(), est.len());
}

#[test]
fn readout_reports_expected_fidelity() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "t1_s": 419e-6, "mu_down": 21.9 / 4.0, "mu_up": 41.3 / 4.0, "bin_width_s": 20e-6,
        "probe_duration_s": 0.4, "sequences": 4, "rebin": 4, "threshold": 30, "seed": 5,
    });
    let (code, out) = cqed("readout", &cfg, dir.path(), &[]);
    assert_eq!(code, 0);
    let r = read_json(&out.join("readout.json"));
    let nominal = r["fidelity_nominal"]["fidelity"].as_f64().unwrap();
    assert!((nominal - 0.960).abs() < 0.003, "{nominal}");
    // Fitted means include bins straddling a jump.
    let fitted = r["fidelity"]["fidelity"].as_f64().unwrap();
    assert!((fitted - 0.96).abs() < 0.02, "{fitted}");
    let t1 = r["t1_s"].as_f64().unwrap();
    assert!((t1 - 419e-6).abs() / 419e-6 < 0.15, "{t1}");
    let hist = read_rows(&out.join("histogram.csv"));
    let shots: f64 = hist.iter().map(|r| r[1]).sum();
    assert_eq!(shots, 4.0 * 5000.0);
}

#[test]
fn budget_reproduces_loss_table() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({ "q_sim": 4250, "t_sim": 0.90, "q_exp": 3540, "f0_hz": 406.77e12 });
    let (code, out) = cqed("budget", &cfg, dir.path(), &[]);
    assert_eq!(code, 0);
    let r = read_json(&out.join("budget.json"));
    let within = |v: &Value, want: f64| ((v.as_f64().unwrap() - want) / want).abs() < 0.02;
    assert!(within(&r["q"]["q_c"], 8960.0));
    assert!(within(&r["q"]["q_rad"], 83000.0));
    assert!(within(&r["q"]["q_fab"], 21000.0));
    assert!(within(&r["rates_hz"]["kappa_exp"], 115e9));
    assert!(within(&r["rates_hz"]["kappa_c"], 45.4e9));
    assert!(within(&r["rates_hz"]["kappa_fab"], 19.4e9));
    assert!(within(&r["t_exp"], 0.62));
    let lib = QBudget::from_measurement(4250.0, 0.90, 3540.0, 406.77e12).unwrap();
    assert_eq!(r["q"]["q_c"].as_f64().unwrap(), lib.q_c);
    assert_eq!(read_rows_raw(&out.join("budget.csv")).len(), 5);
}

fn read_rows_raw(p: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(p).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn magnet_without_external_is_mount_only() {
    let dir = TempDir::new().unwrap();
    let (code, out) = cqed("magnet", &json!({}), dir.path(), &[]);
    assert_eq!(code, 0);
    assert!(!out.join("alpha_map.csv").exists());
    let r = read_json(&out.join("magnet.json"));
    let axis = CrystalFrame::default().primary();
    let template = CylMagnet::new(MOUNT_DIAMETER, MOUNT_THICKNESS, 1.1, Vec3::zeros(), Vec3::z()).unwrap();
    let cal = calibrate_mount(&template, IDEAL_POSITION, TARGET_FIELD, &axis).unwrap();
    let b = field_at(&[cal.mount], &cal.sample_point(MEASURED_POSITION)).unwrap().b;
    let alpha = misalignment_deg(&b, &axis).unwrap();
    assert_eq!(r["mount_only_alpha_deg"].as_f64().unwrap(), alpha);
    assert!((2.0..=4.0).contains(&alpha), "{alpha}");

    let (code, out) = cqed("magnet", &json!({ "external": { "points": 33 } }), dir.path(), &["--seed", "1"]);
    assert_eq!(code, 0);
    let r = read_json(&out.join("magnet.json"));
    assert_eq!(r["mount_only_alpha_deg"].as_f64().unwrap(), alpha);
    assert!(r["external"]["best"]["alpha_deg"].as_f64().unwrap() < 1.0);
    assert_eq!(read_rows(&out.join("alpha_map.csv")).len(), 33 * 33);
}

fn manifest_code(out: &Path) -> i64 {
    read_json(&out.join("run.json"))["exit_code"].as_i64().unwrap()
}

#[test]
fn config_errors_exit_two_with_manifest() {
    let dir = TempDir::new().unwrap();
    let (code, out) = cqed("budget", &json!({ "q_sim": 4250, "t_sim": 0.9, "q_exp": 3540, "f0": 1 }), dir.path(), &[]);
    assert_eq!(code, 2);
    assert_eq!(manifest_code(&out), 2);
    let err = read_json(&out.join("run.json"))["error"].as_str().unwrap().to_string();
    assert!(err.contains("f0") && err.contains("line"), "{err}");

    let (code, _) = cqed("spectrum", &json!({ "geometry": "sideways" }), dir.path(), &[]);
    assert_eq!(code, 2);
    let bad = dir.path().join("broken.json");
    std::fs::write(&bad, "{ \"q_sim\": ").unwrap();
    let (code, out) = run_raw("budget", &bad, dir.path(), &["--seed", "9"]);
    assert_eq!(code, 2);
    assert_eq!(manifest_code(&out), 2);
    let (code, _) = run_raw("budget", &dir.path().join("absent.json"), dir.path(), &[]);
    assert_eq!(code, 2);
    let (code, _) = cqed("magnet", &json!({ "siv_axis": "[000]" }), dir.path(), &[]);
    assert_eq!(code, 2);
}

#[test]
fn data_errors_exit_three() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "frequency_hz,counts,exposure_s\n").unwrap();
    let (code, out) = cqed("fit", &json!({ "model": "broadband", "inputs": ["empty.csv"] }), dir.path(), &[]);
    assert_eq!(code, 3);
    assert_eq!(manifest_code(&out), 3);
    let (code, _) = cqed("fit", &json!({ "model": "broadband", "inputs": ["missing.csv"] }), dir.path(), &[]);
    assert_eq!(code, 3);
}

#[test]
fn failed_fits_exit_four() {
    let dir = TempDir::new().unwrap();
    let freqs: Vec<f64> = (0..101).map(|i| F_CAV - 200.0 * GHZ + 4.0 * GHZ * i as f64).collect();
    SampledSpectrum::new(freqs, vec![500; 101], 1.0).unwrap().save_csv(&dir.path().join("flat.csv")).unwrap();
    let (code, out) = cqed("fit", &json!({ "model": "broadband", "inputs": ["flat.csv"] }), dir.path(), &[]);
    assert_eq!(code, 4);
    let m = read_json(&out.join("run.json"));
    assert_eq!(m["status"], "error");
    assert!(m["error"].as_str().unwrap().contains("every fit failed"));
    let (code, _) = cqed("budget", &json!({ "q_sim": 4250, "t_sim": 0.9, "q_exp": 5000, "f0_hz": 4e14 }), dir.path(), &[]);
    assert_eq!(code, 4);
}

#[test]
fn manifest_echoes_resolved_config() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({ "objective": { "kind": "toy_cavity" }, "global_budget": 40, "local_budget": 20 });
    let (code, out) = cqed("optimize", &cfg, dir.path(), &["--seed", "8"]);
    assert_eq!(code, 0);
    let m = read_json(&out.join("run.json"));
    assert_eq!(m["command"], "optimize");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 8);
    assert_eq!(m["config"]["n_clusters"], 5);
    assert_eq!(m["config"]["objective"]["q_fab"], 5e4);
    assert_eq!(m["outputs"], json!(["evaluations.csv", "designs.json"]));
}

#[test]
fn shipped_configs_parse() {
    use cqed_cli::config::{self, *};
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let text = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
    config::parse::<SpectrumConfig>(&text("spectrum.json")).unwrap();
    config::parse::<FitConfig>(&text("fit.json")).unwrap();
    config::parse::<ReadoutConfig>(&text("readout.json")).unwrap();
    config::parse::<OptimizeConfig>(&text("optimize.json")).unwrap();
    config::parse::<MagnetConfig>(&text("magnet.json")).unwrap();
    config::parse::<BudgetConfig>(&text("budget.json")).unwrap();
}
