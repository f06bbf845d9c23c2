use log::warn;
use pathopt_core::apps::{elastictree_baseline, RecipeKind};
use pathopt_core::pathgen::{select_paths, PathSet, SelectStrategy};
use pathopt_lp::{solve_milp, Sense, Solution};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Instance;
use crate::workflow::{generate, solve_selected};
use crate::CliError;

/// Largest candidate-path count the all-paths baseline is attempted on.
pub const DEFAULT_BASELINE_LIMIT: usize = 20_000;

#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub select_numbers: Vec<usize>,
    pub strategies: Vec<SelectStrategy>,
    pub trials: usize,
    pub baseline_limit: usize,
    /// Leaves timing columns empty so repeated runs compare byte for byte.
    pub deterministic: bool,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            select_numbers: vec![1, 3, 5, 10],
            strategies: vec![SelectStrategy::Shortest, SelectStrategy::Random],
            trials: 1,
            baseline_limit: DEFAULT_BASELINE_LIMIT,
            deterministic: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub strategy: String,
    pub select_number: usize,
    pub trial: usize,
    pub objective: Option<f64>,
    pub objective_ratio_vs_all_paths: Option<f64>,
    pub build_ms: Option<f64>,
    pub solve_ms: Option<f64>,
    pub status: String,
    pub note: String,
}

/// The all-paths optimum, or why there is none.
#[derive(Clone, Debug)]
pub enum Baseline {
    Solved { objective: f64, sense: Sense },
    Unavailable(String),
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Solves the recipe over every candidate path. ElasticTree uses its arc
/// formulation instead, which needs no path enumeration.
pub fn baseline(inst: &Instance, all: &PathSet, limit: usize) -> Result<Baseline, CliError> {
    let (sol, sense): (Solution, Sense) = match &inst.recipe.kind {
        RecipeKind::ElasticTree { switch_power, link_power } => {
            let model = elastictree_baseline(&inst.topo, &inst.tm, switch_power, link_power)?;
            (solve_milp(&model, &inst.opts), model.objective().sense)
        }
        _ => {
            let n = all.total_paths();
            if n > limit {
                return Ok(Baseline::Unavailable(format!("baseline skipped: {n} paths exceed limit {limit}")));
            }
            let s = solve_selected(inst, &inst.tm, all, None)?;
            (s.solution, s.sense)
        }
    };
    if !sol.status.is_optimal() {
        return Ok(Baseline::Unavailable(format!("baseline {}", sol.status)));
    }
    Ok(Baseline::Solved { objective: sol.objective, sense })
}

/// Ratio oriented so that 1 is optimal and larger is worse.
pub fn objective_ratio(obj: f64, base: f64, sense: Sense) -> Option<f64> {
    let (num, den) = match sense {
        Sense::Minimize => (obj, base),
        Sense::Maximize => (base, obj),
    };
    if den.abs() < 1e-12 {
        return if num.abs() < 1e-12 { Some(1.0) } else { None };
    }
    finite(num / den)
}

/// One row per (strategy, select number, trial), in that nesting order.
/// Trial `t` selects with seed `inst.seed + t`.
pub fn bench(inst: &Instance, spec: &BenchSpec) -> Result<Vec<BenchRow>, CliError> {
    if spec.select_numbers.is_empty() || spec.strategies.is_empty() || spec.trials == 0 {
        return Err(CliError::Input {
            path: "bench".into(),
            msg: "needs at least one select number, one strategy and one trial".into(),
        });
    }
    let (all, _) = generate(inst, &inst.tm)?;
    let base = baseline(inst, &all, spec.baseline_limit)?;
    if let Baseline::Unavailable(why) = &base {
        warn!("{why}");
    }

    let mut jobs = Vec::new();
    for &s in &spec.strategies {
        for &n in &spec.select_numbers {
            for t in 0..spec.trials {
                jobs.push((s, n, t));
            }
        }
    }
    jobs.par_iter()
        .map(|&(strategy, n, trial)| {
            let seed = inst.seed.wrapping_add(trial as u64);
            let selected = select_paths(&all, strategy, n, seed, None)?;
            let solved = solve_selected(inst, &inst.tm, &selected, None)?;
            let status = solved.solution.status;
            let objective = status.has_solution().then(|| finite(solved.solution.objective)).flatten();
            let (ratio, note) = match (&base, objective) {
                (Baseline::Solved { objective: b, sense }, Some(o)) if status.is_optimal() => {
                    (objective_ratio(o, *b, *sense), String::new())
                }
                (Baseline::Solved { .. }, _) => (None, format!("selection {status}")),
                (Baseline::Unavailable(why), _) => (None, why.clone()),
            };
            let keep = |v: f64| (!spec.deterministic).then_some(v);
            Ok(BenchRow {
                strategy: strategy.to_string(),
                select_number: n,
                trial,
                objective,
                objective_ratio_vs_all_paths: ratio,
                build_ms: keep(solved.build_ms),
                solve_ms: keep(solved.solve_ms),
                status: status.to_string(),
                note,
            })
        })
        .collect()
}

pub fn to_csv(rows: &[BenchRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(std::io::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
