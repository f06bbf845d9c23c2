use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use pathopt_core::optmodel::{AuditReport, DiffMode, PrevSolution};
use pathopt_core::pathgen::{generate_paths, select_paths, DependencyIndex, Failure, PathSet};
use pathopt_core::rulegen::{default_class_prefixes, generate_rules, MockController, RuleSet, DEFAULT_MAX_DEPTH};
use pathopt_core::topology::NodeId;
use pathopt_core::traffic::TrafficMatrix;
use pathopt_lp::{Sense, Solution};
use serde::Serialize;

use crate::config::Instance;
use crate::CliError;

/// Default relative slack before a restricted re-solve counts as much worse.
pub const DEFAULT_THETA: f64 = 0.1;

/// Tolerance for audits of solved programs.
pub const AUDIT_TOL: f64 = 1e-6;

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// One solve over a fixed path selection.
#[derive(Clone, Debug)]
pub struct Solved {
    pub selected: PathSet,
    pub solution: Solution,
    pub audit: AuditReport,
    pub sense: Sense,
    /// The recipe's own objective. Equals `solution.objective` unless a
    /// churn term was added, in which case it is the largest load.
    pub base_objective: f64,
    /// `Diff` when the churn term was added.
    pub diff: Option<f64>,
    pub build_ms: f64,
    pub solve_ms: f64,
}

/// Keeps the classes of `tm` only.
pub fn restrict(paths: &PathSet, tm: &TrafficMatrix) -> PathSet {
    let mut out = PathSet::new();
    for c in &tm.classes {
        out.insert(c.id, paths.get(c.id).to_vec());
    }
    out
}

/// All candidate paths of the instance: the cache when configured,
/// otherwise a fresh generation. Returns the set and the time taken.
pub fn generate(inst: &Instance, tm: &TrafficMatrix) -> Result<(PathSet, f64), CliError> {
    let t = Instant::now();
    let all = match &inst.paths_cache {
        Some(p) => {
            let cached = PathSet::load(p).map_err(|e| CliError::input(p, e))?;
            if let Some(c) = tm.classes.iter().find(|c| cached.get(c.id).is_empty()) {
                return Err(CliError::input(p, format!("no cached paths for class {}", c.id)));
            }
            restrict(&cached, tm)
        }
        None => generate_paths(&inst.topo, tm, &*inst.recipe.predicate(), &inst.recipe.gen)?,
    };
    Ok((all, ms(t)))
}

/// Builds the recipe over `selected` and solves it. With `churn`, the
/// objective trades the recipe's max load against change from the
/// previous fractions.
pub fn solve_selected(
    inst: &Instance,
    tm: &TrafficMatrix,
    selected: &PathSet,
    churn: Option<(&PrevSolution, f64)>,
) -> Result<Solved, CliError> {
    let t = Instant::now();
    let mut b = inst.recipe.build(&inst.topo, tm, selected)?;
    let base = inst.recipe.churn_base();
    if let Some((prev, w)) = churn {
        let base = base.as_ref().ok_or_else(|| CliError::Input {
            path: "recipe".into(),
            msg: format!("recipe {} has no load objective to trade against churn", inst.recipe.name),
        })?;
        b.add_min_churn(prev, w, base, DiffMode::Max)?;
    }
    let build_ms = ms(t);
    let t = Instant::now();
    let solution = b.solve(&inst.opts);
    let solve_ms = ms(t);
    let audit = b.audit(&solution, AUDIT_TOL);
    let base_objective = match (&churn, &base) {
        (Some(_), Some(base)) => b.max_load(&solution, base).unwrap_or(f64::NAN),
        _ => solution.objective,
    };
    Ok(Solved {
        selected: selected.clone(),
        diff: churn.and_then(|_| solution.value("Diff")),
        sense: b.model().objective().sense,
        solution,
        audit,
        base_objective,
        build_ms,
        solve_ms,
    })
}

/// Rules realizing the solved fractions; `None` without a solution.
pub fn rules_for(inst: &Instance, tm: &TrafficMatrix, solved: &Solved) -> Result<Option<RuleSet>, CliError> {
    if !solved.solution.status.has_solution() {
        return Ok(None);
    }
    let prefixes = default_class_prefixes(tm);
    Ok(Some(generate_rules(&inst.topo, tm, &solved.selected, &solved.solution, &prefixes, DEFAULT_MAX_DEPTH)?))
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    pub command: String,
    pub recipe: String,
    pub status: String,
    pub objective: Option<f64>,
    pub gen_ms: f64,
    pub build_ms: f64,
    pub solve_ms: f64,
    pub classes: usize,
    pub generated_paths: usize,
    pub selected_paths: usize,
    pub rules: usize,
    /// Reoptimization step that produced the solution.
    pub step: Option<u8>,
    pub diff: Option<f64>,
    pub audit_violations: usize,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub generated: PathSet,
    pub solved: Solved,
    pub rules: Option<RuleSet>,
    pub metrics: Metrics,
}

impl Outcome {
    fn new(
        command: &str,
        inst: &Instance,
        tm: &TrafficMatrix,
        generated: PathSet,
        gen_ms: f64,
        solved: Solved,
        step: Option<u8>,
    ) -> Result<Self, CliError> {
        let rules = rules_for(inst, tm, &solved)?;
        let metrics = Metrics {
            command: command.into(),
            recipe: inst.recipe.name.clone(),
            status: solved.solution.status.to_string(),
            objective: solved.solution.objective.is_finite().then_some(solved.solution.objective),
            gen_ms,
            build_ms: solved.build_ms,
            solve_ms: solved.solve_ms,
            classes: tm.classes.len(),
            generated_paths: generated.total_paths(),
            selected_paths: solved.selected.total_paths(),
            rules: rules.as_ref().map_or(0, |r| r.rules.len()),
            step,
            diff: solved.diff,
            audit_violations: solved.audit.violations.len(),
        };
        Ok(Outcome { generated, solved, rules, metrics })
    }

    pub fn is_optimal(&self) -> bool {
        self.solved.solution.status.is_optimal()
    }

    /// Writes `solution.json`, `selected_paths.json`, `generated_paths.json`,
    /// `metrics.csv` and, when solved, `rules.json` plus the controller
    /// payloads.
    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(out_dir)?;
        fs::write(out_dir.join("solution.json"), self.solved.solution.to_json())?;
        fs::write(out_dir.join("selected_paths.json"), self.solved.selected.to_json())?;
        fs::write(out_dir.join("generated_paths.json"), self.generated.to_json())?;
        let mut w = csv::Writer::from_path(out_dir.join("metrics.csv")).map_err(std::io::Error::from)?;
        w.serialize(&self.metrics).map_err(std::io::Error::from)?;
        w.flush()?;
        if let Some(rules) = &self.rules {
            fs::write(out_dir.join("rules.json"), rules.rules_json())?;
            MockController::new(out_dir).push(rules)?;
        }
        Ok(())
    }
}

/// Generate, select, solve and derive rules.
pub fn run(inst: &Instance) -> Result<Outcome, CliError> {
    let (generated, gen_ms) = generate(inst, &inst.tm)?;
    let selected = select_paths(&generated, inst.recipe.strategy, inst.recipe.select_number, inst.seed, None)?;
    let solved = solve_selected(inst, &inst.tm, &selected, None)?;
    info!("{}: {} objective {}", inst.recipe.name, solved.solution.status, solved.solution.objective);
    Outcome::new("run", inst, &inst.tm, generated, gen_ms, solved, None)
}

/// What changed since the previous solve.
#[derive(Clone, Debug)]
pub enum Event {
    FailNode(NodeId),
    FailLink(NodeId, NodeId),
    /// Replacement traffic, before the recipe prepares it.
    NewTraffic(TrafficMatrix),
}

/// The selection and solution of the previous solve.
#[derive(Clone, Debug)]
pub struct PrevRun {
    pub selected: PathSet,
    pub solution: Solution,
}

impl PrevRun {
    pub fn load(solution: &Path, selected: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(solution).map_err(|e| CliError::input(solution, e))?;
        let solution = Solution::from_json(&text).map_err(|e| CliError::input(solution, e))?;
        let selected = PathSet::load(selected).map_err(|e| CliError::input(selected, e))?;
        Ok(PrevRun { selected, solution })
    }
}

#[derive(Clone, Debug)]
pub struct Reoptimized {
    pub outcome: Outcome,
    /// 1 when the surviving selection sufficed, 2 after reselection.
    pub step: u8,
    /// Recipe objective of the previous solution under the old traffic.
    pub prev_objective: f64,
    /// The restricted re-solve, if every class kept a path.
    pub step1: Option<Solved>,
    /// Selected paths dropped by the failure, as `(class, path index)`.
    pub impacted: BTreeSet<(u32, usize)>,
}

// Written negated so a NaN objective counts as worse.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn much_worse(sense: Sense, new: f64, old: f64, theta: f64) -> bool {
    let slack = theta * old.abs() + 1e-9;
    match sense {
        Sense::Minimize => !(new <= old + slack),
        Sense::Maximize => !(new >= old - slack),
    }
}

/// Two-step reaction to `event`. Step 1 re-solves over the previous
/// selection minus the paths the failure impacts (new classes get a fresh
/// selection). If a class lost every path, or the step-1 objective is more
/// than a factor `1 + theta` worse than the previous one, step 2 reselects
/// from all surviving candidates, keeping the step-1 paths, and solves
/// again. A positive `weight` adds the churn term against the previous
/// fractions.
pub fn reoptimize(inst: &Instance, prev: &PrevRun, event: &Event, weight: f64, theta: f64) -> Result<Reoptimized, CliError> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(CliError::Input { path: "churn weight".into(), msg: format!("{weight} is outside [0, 1]") });
    }
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(CliError::Input { path: "theta".into(), msg: format!("{theta} must be non-negative") });
    }
    let (tm, failures) = match event {
        Event::FailNode(v) => {
            if !inst.topo.contains(*v) {
                return Err(CliError::Input { path: "event".into(), msg: format!("node {v} is not in the topology") });
            }
            (inst.tm.clone(), vec![Failure::Node(*v)])
        }
        Event::FailLink(a, b) => {
            if inst.topo.link(*a, *b).is_none() && inst.topo.link(*b, *a).is_none() {
                return Err(CliError::Input { path: "event".into(), msg: format!("link {a}-{b} is not in the topology") });
            }
            (inst.tm.clone(), vec![Failure::Link(*a, *b)])
        }
        Event::NewTraffic(t) => {
            t.validate(Some(&inst.topo)).map_err(|e| CliError::Input { path: "new traffic".into(), msg: e.to_string() })?;
            (inst.recipe.prepare_traffic(t), Vec::new())
        }
    };

    // Reference: the previous fractions evaluated on the previous instance.
    let prev_sel = restrict(&prev.selected, &inst.tm);
    let reference = inst.recipe.build(&inst.topo, &inst.tm, &prev_sel)?;
    let prev_objective = match inst.recipe.churn_base() {
        Some(base) => reference.max_load(&prev.solution, &base).unwrap_or(f64::NAN),
        None => {
            let vals: Vec<f64> =
                reference.model().vars().iter().map(|v| prev.solution.value(&v.name).unwrap_or(0.0)).collect();
            reference.model().evaluate_objective(&vals)
        }
    };
    let sense = reference.model().objective().sense;

    let impacted = DependencyIndex::build(&prev.selected).impacted(&failures);
    let mut survivors = PathSet::new();
    for (c, paths) in prev.selected.iter() {
        let kept = paths.iter().enumerate().filter(|(i, _)| !impacted.contains(&(c, *i))).map(|(_, p)| p.clone()).collect();
        survivors.insert(c, kept);
    }
    let survivors = restrict(&survivors, &tm);
    let prev_fractions = PrevSolution::from_solution(&prev.selected, &prev.solution);
    let churn = (weight > 0.0).then_some((&prev_fractions, weight));

    let mut generated: Option<(PathSet, f64)> = None;
    let new_classes: Vec<u32> = tm.classes.iter().map(|c| c.id).filter(|c| prev.selected.get(*c).is_empty()).collect();
    let mut step1 = survivors.clone();
    if !new_classes.is_empty() {
        let (all, gen_ms) = generate(inst, &tm)?;
        let mut fresh = PathSet::new();
        for c in &new_classes {
            fresh.insert(*c, all.get(*c).to_vec());
        }
        let fresh = select_paths(&fresh, inst.recipe.strategy, inst.recipe.select_number, inst.seed, None)?;
        for (c, p) in fresh.iter() {
            step1.insert(c, p.to_vec());
        }
        generated = Some((all, gen_ms));
    }

    let emptied: Vec<u32> = tm.classes.iter().map(|c| c.id).filter(|c| step1.get(*c).is_empty()).collect();
    let mut step1_solved = None;
    if emptied.is_empty() {
        let solved = solve_selected(inst, &tm, &step1, churn)?;
        let worse =
            !solved.solution.status.has_solution() || much_worse(sense, solved.base_objective, prev_objective, theta);
        if !worse {
            info!("step 1 suffices: objective {} vs previous {prev_objective}", solved.base_objective);
            let (all, gen_ms) = generated.unwrap_or_else(|| (step1.clone(), 0.0));
            let outcome = Outcome::new("reoptimize", inst, &tm, all, gen_ms, solved.clone(), Some(1))?;
            return Ok(Reoptimized { outcome, step: 1, prev_objective, step1: Some(solved), impacted });
        }
        warn!(
            "step 2: restricted re-solve is {} with objective {} against previous {prev_objective}",
            solved.solution.status, solved.base_objective
        );
        step1_solved = Some(solved);
    } else {
        warn!("step 2: classes {emptied:?} lost every selected path");
    }

    let (all, gen_ms) = match generated {
        Some(g) => g,
        None => generate(inst, &tm)?,
    };
    let avail = all.without(&failures);
    if let Some(c) = tm.classes.iter().find(|c| avail.get(c.id).is_empty()) {
        return Err(CliError::InfeasibleClass(c.id));
    }
    let selected = select_paths(&avail, inst.recipe.strategy, inst.recipe.select_number, inst.seed, Some(&step1))?;
    let solved = solve_selected(inst, &tm, &selected, churn)?;
    let outcome = Outcome::new("reoptimize", inst, &tm, all, gen_ms, solved, Some(2))?;
    Ok(Reoptimized { outcome, step: 2, prev_objective, step1: step1_solved, impacted })
}
