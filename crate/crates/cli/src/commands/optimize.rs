use std::path::Path;

use cqed_design::objective::{ExternalObjective, MultiBump, ToyCavity, DEFAULT_WINDOW, TOY_NAMES, TOY_REFERENCE};
use cqed_design::{interleaved_search, Objective, ObjectiveSpec, ParamBox, SearchOptions};
use serde_json::json;

use super::{resolve, Artifacts};
use crate::config::{ObjectiveConfig, OptimizeConfig};
use crate::{CliError, Outputs};

/// Half-width of the default toy-cavity box relative to the reference.
const TOY_SPAN: f64 = 0.1;

fn param_box(cfg: &OptimizeConfig) -> Result<ParamBox, CliError> {
    if let Some(bounds) = &cfg.bounds {
        let names = bounds.iter().map(|b| b.name.clone()).collect();
        let lower = bounds.iter().map(|b| b.lower).collect();
        let upper = bounds.iter().map(|b| b.upper).collect();
        return Ok(ParamBox::new(names, lower, upper)?);
    }
    match &cfg.objective {
        ObjectiveConfig::MultiBump { dim, .. } => Ok(ParamBox::unit(*dim)),
        ObjectiveConfig::ToyCavity { .. } => Ok(ParamBox::new(
            TOY_NAMES.iter().map(|s| s.to_string()).collect(),
            TOY_REFERENCE.iter().map(|r| r * (1.0 - TOY_SPAN)).collect(),
            TOY_REFERENCE.iter().map(|r| r * (1.0 + TOY_SPAN)).collect(),
        )?),
        ObjectiveConfig::External { .. } => Err(CliError::Config("external objectives need `bounds`".into())),
    }
}

pub fn run(cfg: &OptimizeConfig, seed: u64, base: &Path, out: &Path) -> Result<Outputs, CliError> {
    let bx = param_box(cfg)?;
    let mut landscape_max = None;
    let (objective, default_window): (Box<dyn Objective>, _) = match &cfg.objective {
        ObjectiveConfig::MultiBump { dim, bumps, width, landscape_seed } => {
            if bx.dim() != *dim {
                return Err(CliError::Config(format!("`bounds` has {} entries for dim {dim}", bx.dim())));
            }
            let m = MultiBump::seeded(*dim, *bumps, *width, *landscape_seed);
            landscape_max = Some(m.global_max().1);
            (Box::new(m), None)
        }
        ObjectiveConfig::ToyCavity { q_fab } => {
            if bx.dim() != TOY_NAMES.len() {
                return Err(CliError::Config("the toy cavity has six parameters".into()));
            }
            (Box::new(ToyCavity { q_fab: *q_fab }), Some(DEFAULT_WINDOW))
        }
        ObjectiveConfig::External { command, args } => {
            // Commands naming a file next to the config run from there.
            let local = resolve(base, Path::new(command));
            let command = if command.contains('/') && local.exists() {
                local.display().to_string()
            } else {
                command.clone()
            };
            (Box::new(ExternalObjective { command, args: args.clone(), names: bx.names.clone() }), None)
        }
    };
    let window = cfg.window_m.map(|[lo, hi]| (lo, hi)).or(default_window);
    let spec = ObjectiveSpec::new(objective, window);
    let opts = SearchOptions {
        global_budget: cfg.global_budget,
        local_budget: cfg.local_budget,
        n_clusters: cfg.n_clusters,
        seed,
        schedule: cfg.schedule,
    };
    let result = interleaved_search(&spec, &bx, &opts)?;

    let mut art = Artifacts::new(out);
    result.log.save_csv(&art.path("evaluations.csv"))?;
    let report = json!({
        "designs": result.ranked,
        "evaluations": result.log.len(),
        "lipo_stalled": result.lipo_stalled,
        "replay_violations": result.log.replay_violations(),
        "landscape_max": landscape_max,
    });
    art.json("designs.json", &report)?;
    let best = result.best();
    let summary = json!({
        "best_value": best.map(|b| b.value),
        "best_point": best.map(|b| b.point.clone()),
        "evaluations": result.log.len(),
        "landscape_max": landscape_max,
    });
    Ok(Outputs { files: art.files, summary })
}
