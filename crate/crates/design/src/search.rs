//! LIPO global search interleaved with trust-region refinement of the most
//! promising clusters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lipo::{lipo_steps, EvalLog, Evaluator, LogEntry};
use crate::objective::ObjectiveSpec;
use crate::param_box::{distance, ParamBox};
use crate::trust_region::refine;
use crate::DesignError;

/// Cluster linkage distance as a fraction of the unit-box diagonal.
pub const CLUSTER_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// All LIPO evaluations, then one refinement per cluster.
    GlobalThenLocal,
    /// `rounds` alternations of a LIPO slice and a refinement slice.
    Alternating { rounds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchOptions {
    pub global_budget: usize,
    pub local_budget: usize,
    pub n_clusters: usize,
    pub seed: u64,
    pub schedule: Schedule,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { global_budget: 200, local_budget: 300, n_clusters: 5, seed: 0, schedule: Schedule::GlobalThenLocal }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDesign {
    pub rank: usize,
    pub names: Vec<String>,
    pub point: Vec<f64>,
    pub value: f64,
    /// Best raw evaluation of the cluster the refinement started from.
    pub seed_value: f64,
    pub cluster_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub ranked: Vec<RankedDesign>,
    pub log: EvalLog,
    /// The LIPO phase stopped early because no candidate passed the bound.
    pub lipo_stalled: bool,
}

impl SearchResult {
    pub fn best(&self) -> Option<&RankedDesign> {
        self.ranked.first()
    }

    pub fn write_json<W: std::io::Write>(&self, w: W) -> Result<(), DesignError> {
        serde_json::to_writer_pretty(w, &self.ranked)?;
        Ok(())
    }
}

/// Single-linkage clusters of `entries` (unit coordinates) at linkage
/// distance `threshold`, each sorted by score and the list sorted by best
/// member.
pub fn single_linkage<'a>(entries: &[&'a LogEntry], threshold: f64) -> Vec<Vec<&'a LogEntry>> {
    let n = entries.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if distance(&entries[i].unit, &entries[j].unit) <= threshold {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<&LogEntry>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(entries[i]);
    }
    for g in &mut groups {
        g.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    }
    groups.sort_by(|a, b| b[0].score.total_cmp(&a[0].score).then(a[0].index.cmp(&b[0].index)));
    groups
}

/// Top evaluations considered for clustering.
fn top_entries(log: &EvalLog, n_clusters: usize) -> Vec<&LogEntry> {
    let mut all: Vec<&LogEntry> = log.entries.iter().collect();
    all.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    let m = (10 * n_clusters).max(log.len().div_ceil(5)).min(all.len());
    all.truncate(m);
    all
}

struct Refined {
    point: Vec<f64>,
    unit_start: Vec<f64>,
    value: f64,
    seed_value: f64,
    cluster_size: usize,
}

pub fn interleaved_search(obj: &ObjectiveSpec, bx: &ParamBox, opts: &SearchOptions) -> Result<SearchResult, DesignError> {
    bx.validate()?;
    if opts.global_budget < bx.dim() + 1 || opts.local_budget == 0 || opts.n_clusters == 0 {
        return Err(DesignError::InvalidInput("budgets and cluster count must be positive".into()));
    }
    let rounds = match opts.schedule {
        Schedule::GlobalThenLocal => 1,
        Schedule::Alternating { rounds } if rounds > 0 => rounds,
        Schedule::Alternating { .. } => return Err(DesignError::InvalidInput("rounds must be positive".into())),
    };
    let threshold = CLUSTER_FRACTION * bx.unit_diagonal();
    let mut ev = Evaluator::new(obj, bx, opts.global_budget + opts.local_budget);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut refined: Vec<Refined> = Vec::new();
    let mut stalled = false;
    let mut global_left = opts.global_budget;
    let mut local_left = opts.local_budget;

    for round in 0..rounds {
        let slice = global_left / (rounds - round);
        let (done, stop) = lipo_steps(&mut ev, &mut rng, slice.max(1).min(global_left));
        global_left -= done;
        stalled |= stop == crate::lipo::LipoStop::Stalled;
        if stalled {
            // Hand the unused global budget to the local phase.
            local_left += global_left;
            global_left = 0;
        }

        let per_round = if round + 1 == rounds || stalled { local_left } else { local_left / (rounds - round) };
        let snapshot = ev.log.clone();
        let clusters = single_linkage(&top_entries(&snapshot, opts.n_clusters), threshold);
        // Skip clusters whose seed lies on an earlier refinement start.
        let fresh: Vec<&Vec<&LogEntry>> = clusters
            .iter()
            .filter(|c| refined.iter().all(|r| distance(&r.unit_start, &c[0].unit) > threshold))
            .take(if rounds == 1 { opts.n_clusters } else { 1 })
            .collect();
        let mut round_left = per_round;
        for (i, c) in fresh.iter().enumerate() {
            let share = round_left / (fresh.len() - i);
            let start = &c[0];
            let r = refine(&mut ev, &start.point, start.score, share);
            round_left -= r.evaluations;
            local_left -= r.evaluations;
            refined.push(Refined {
                point: r.point,
                unit_start: start.unit.clone(),
                value: r.value,
                seed_value: start.score,
                cluster_size: c.len(),
            });
        }
        if stalled {
            break;
        }
    }

    refined.sort_by(|a, b| b.value.total_cmp(&a.value));
    let mut ranked: Vec<RankedDesign> = Vec::new();
    for r in refined {
        let u = bx.to_unit(&r.point);
        if ranked.iter().any(|k| distance(&bx.to_unit(&k.point), &u) <= threshold) {
            continue;
        }
        ranked.push(RankedDesign {
            rank: ranked.len() + 1,
            names: bx.names.clone(),
            point: r.point,
            value: r.value,
            seed_value: r.seed_value,
            cluster_size: r.cluster_size,
        });
    }
    Ok(SearchResult { ranked, log: ev.log, lipo_stalled: stalled })
}
