use std::path::Path;

use cqed_core::loss_budget::{on_resonance_estimates, QBudget};
use serde_json::json;

use super::Artifacts;
use crate::config::BudgetConfig;
use crate::{CliError, Outputs};

pub fn run(cfg: &BudgetConfig, _seed: u64, _base: &Path, out: &Path) -> Result<Outputs, CliError> {
    let b = QBudget::from_measurement(cfg.q_sim, cfg.t_sim, cfg.q_exp, cfg.f0_hz)?;
    let rates = b.rates();
    let (r_exp, t_exp) = on_resonance_estimates(&b);
    let report = json!({
        "q": b,
        "rates_hz": rates,
        "q_rad_effective": b.q_rad_effective(),
        "r_exp": r_exp,
        "t_exp": t_exp,
    });
    let mut art = Artifacts::new(out);
    art.json("budget.json", &report)?;
    let mut w = csv::Writer::from_path(art.path("budget.csv"))?;
    w.write_record(["channel", "q", "rate_hz"])?;
    for (name, q, k) in [
        ("exp", b.q_exp, rates.kappa_exp),
        ("sim", b.q_sim, rates.kappa_sim),
        ("rad", b.q_rad, rates.kappa_rad),
        ("c", b.q_c, rates.kappa_c),
        ("fab", b.q_fab, rates.kappa_fab),
    ] {
        w.write_record([name.to_string(), q.to_string(), k.to_string()])?;
    }
    w.flush()?;
    Ok(Outputs { files: art.files, summary: report })
}
