//! Entry points turning a `ProgramModel` into a `Solution`.

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Ordering;
use std::sync::Arc;
use std::time::{Duration, Instant};

use indexmap::IndexMap;

use crate::model::{ProgramModel, Relation, Sense, VarKind};
use crate::simplex::{CompForm, Engine, LpOptions, LpStatus};
use crate::solution::{Basis, BasisStatus, Solution, Status};

#[derive(Clone, Debug)]
pub struct MilpOptions {
    /// Relative optimality gap at which branch-and-bound stops.
    pub gap: f64,
    pub node_limit: u64,
    pub time_limit: Option<Duration>,
    /// A binary within this distance of 0 or 1 counts as integral.
    pub tol_int: f64,
    pub lp: LpOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions { gap: 1e-4, node_limit: 200_000, time_limit: None, tol_int: 1e-6, lp: LpOptions::default() }
    }
}

/// Solves the continuous relaxation of `model`.
pub fn solve_lp(model: &ProgramModel) -> Solution {
    solve_lp_with(model, &LpOptions::default(), None)
}

pub fn solve_lp_with(model: &ProgramModel, opts: &LpOptions, warm: Option<&Basis>) -> Solution {
    let form = CompForm::new(model);
    let mut eng = Engine::new(&form, opts);
    if let Some(b) = warm {
        eng.set_basis(&map_basis(model, b, &eng));
    }
    let status = eng.solve(f64::INFINITY);
    let mut sol = match status {
        LpStatus::Optimal => {
            let mut s = extract(model, &form, &eng, Status::Optimal);
            let y = eng.duals();
            for (i, row) in model.constraints().iter().enumerate() {
                s.duals.insert(row.name.clone(), form.obj_sign * y[i] * form.row_scale[i]);
            }
            s
        }
        other => Solution::empty(lp_status(other)),
    };
    sol.iterations = eng.iterations;
    sol
}

/// Branch-and-bound over the binary variables; pure LPs are solved directly.
pub fn solve_milp(model: &ProgramModel, opts: &MilpOptions) -> Solution {
    if !model.has_binaries() {
        return solve_lp_with(model, &opts.lp, None);
    }
    BranchAndBound::new(model, opts).run(None, None)
}

/// Re-solves `model` starting from the basis and assignment of `prev`.
/// Entries of `prev` naming unknown variables or rows are ignored.
pub fn resolve_warm(model: &ProgramModel, prev: &Solution, opts: &MilpOptions) -> Solution {
    if !model.has_binaries() {
        return solve_lp_with(model, &opts.lp, prev.basis.as_ref());
    }
    let values: Option<Vec<f64>> = if prev.status.has_solution() {
        Some(model.vars().iter().map(|v| prev.values.get(&v.name).copied().unwrap_or(0.0)).collect())
    } else {
        None
    };
    BranchAndBound::new(model, opts).run(prev.basis.as_ref(), values)
}

fn lp_status(s: LpStatus) -> Status {
    match s {
        LpStatus::Optimal => Status::Optimal,
        LpStatus::Infeasible | LpStatus::Cutoff => Status::Infeasible,
        LpStatus::Unbounded => Status::Unbounded,
        LpStatus::IterationLimit => Status::IterationLimit,
        LpStatus::NumericFailure => Status::NumericFailure,
    }
}

fn map_basis(model: &ProgramModel, basis: &Basis, eng: &Engine) -> Vec<BasisStatus> {
    let n = model.num_vars();
    let mut states: Vec<BasisStatus> = eng.basis_states().to_vec();
    for (j, v) in model.vars().iter().enumerate() {
        if let Some(&s) = basis.vars.get(&v.name) {
            states[j] = s;
        }
    }
    for (i, r) in model.constraints().iter().enumerate() {
        states[n + i] = basis.rows.get(&r.name).copied().unwrap_or(BasisStatus::Basic);
    }
    states
}

fn basis_by_name(model: &ProgramModel, states: &[BasisStatus]) -> Basis {
    let n = model.num_vars();
    Basis {
        vars: model.vars().iter().enumerate().map(|(j, v)| (v.name.clone(), states[j])).collect(),
        rows: model.constraints().iter().enumerate().map(|(i, r)| (r.name.clone(), states[n + i])).collect(),
    }
}

fn extract(model: &ProgramModel, form: &CompForm, eng: &Engine, status: Status) -> Solution {
    let vals: Vec<f64> = (0..form.n).map(|j| eng.x[j] * form.unscale(j)).collect();
    let mut s = Solution::empty(status);
    s.objective = model.evaluate_objective(&vals);
    s.values = model.vars().iter().zip(&vals).map(|(v, &x)| (v.name.clone(), x)).collect::<IndexMap<_, _>>();
    s.basis = Some(basis_by_name(model, eng.basis_states()));
    s
}

struct Node {
    bound: f64,
    depth: u32,
    id: u64,
    fixes: Vec<(u32, bool)>,
    basis: Arc<Vec<BasisStatus>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    /// Max-heap order: lowest bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// Objective weight of each binary. Costs on a continuous variable defined
/// by a zero-rhs equality (`v = Σ k·x`) are passed on to the `x`, two
/// levels deep.
fn binary_costs(model: &ProgramModel) -> HashMap<usize, f64> {
    let mut cost: HashMap<usize, f64> = HashMap::new();
    for &(j, c) in &model.objective().terms {
        *cost.entry(j).or_default() += c;
    }
    for _ in 0..2 {
        for row in model.constraints() {
            if row.relation != Relation::Eq || row.rhs != 0.0 {
                continue;
            }
            let def = row.terms.iter().find(|&&(j, a)| {
                a != 0.0 && model.var(j).kind == VarKind::Continuous && cost.get(&j).is_some_and(|c| *c != 0.0)
            });
            let Some(&(v, a)) = def else { continue };
            let cv = cost.remove(&v).unwrap_or(0.0);
            for &(j, k) in &row.terms {
                if j != v {
                    *cost.entry(j).or_default() -= cv * k / a;
                }
            }
        }
    }
    cost.retain(|&j, c| model.var(j).kind == VarKind::Binary && *c != 0.0);
    cost
}

struct Incumbent {
    obj: f64,
    x: Vec<f64>,
    basis: Vec<BasisStatus>,
}

struct BranchAndBound<'m> {
    model: &'m ProgramModel,
    opts: &'m MilpOptions,
    form: CompForm,
    bins: Vec<usize>,
}

enum NodeLp {
    Solved(f64),
    Infeasible,
    /// The node's bound reached this cutoff.
    Dominated(f64),
    Failed(Status),
}

impl<'m> BranchAndBound<'m> {
    fn new(model: &'m ProgramModel, opts: &'m MilpOptions) -> Self {
        let form = CompForm::new(model);
        let bins = model.binaries().collect();
        BranchAndBound { model, opts, form, bins }
    }

    fn cutoff(&self, inc: &Option<Incumbent>) -> f64 {
        match inc {
            Some(i) => i.obj - (self.opts.gap * (i.obj.abs() + 1e-10)).max(1e-9 * (1.0 + i.obj.abs())),
            None => f64::INFINITY,
        }
    }

    fn apply_fixes(&self, eng: &mut Engine, fixes: &[(u32, bool)]) {
        for &j in &self.bins {
            eng.set_bounds(j, self.form.lb[j], self.form.ub[j]);
        }
        for &(j, up) in fixes {
            let j = j as usize;
            let v = if up { 1.0 / self.form.col_scale[j] } else { 0.0 };
            eng.set_bounds(j, v, v);
        }
    }

    fn value(&self, eng: &Engine, j: usize) -> f64 {
        eng.x[j] * self.form.col_scale[j]
    }

    /// Most fractional binary, lowest index on ties.
    fn branching_var(&self, eng: &Engine) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_frac = self.opts.tol_int;
        for &j in &self.bins {
            let v = self.value(eng, j);
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > best_frac + 1e-12 {
                best_frac = frac;
                best = Some((j, v));
            }
        }
        best
    }

    fn solve_node(&self, eng: &mut Engine, cutoff: f64) -> NodeLp {
        let r = eng.solve(cutoff);
        match r {
            LpStatus::Optimal => {
                let obj = eng.objective();
                if obj >= cutoff {
                    NodeLp::Dominated(cutoff)
                } else {
                    NodeLp::Solved(obj)
                }
            }
            LpStatus::Cutoff => NodeLp::Dominated(cutoff),
            LpStatus::Infeasible => NodeLp::Infeasible,
            other => NodeLp::Failed(lp_status(other)),
        }
    }

    fn offer(&self, eng: &Engine, obj: f64, inc: &mut Option<Incumbent>) -> bool {
        if inc.as_ref().is_some_and(|i| i.obj <= obj) {
            return false;
        }
        *inc = Some(Incumbent { obj, x: eng.x[..self.form.n].to_vec(), basis: eng.basis_states().to_vec() });
        true
    }

    /// Fractional diving from the current node: repeatedly fix the binary
    /// closest to integrality and re-solve until integral or infeasible.
    fn dive(&self, eng: &mut Engine, fixes: &[(u32, bool)], inc: &mut Option<Incumbent>) {
        let mut fixes = fixes.to_vec();
        for _ in 0..2 * self.bins.len() + 1 {
            let mut pick: Option<(usize, bool, f64)> = None;
            for &j in &self.bins {
                let v = self.value(eng, j);
                let frac = (v - v.floor()).min(v.ceil() - v);
                if frac <= self.opts.tol_int {
                    continue;
                }
                if pick.is_none_or(|(_, _, f)| frac < f) {
                    pick = Some((j, v >= 0.5, frac));
                }
            }
            let Some((j, up, _)) = pick else {
                let obj = eng.objective();
                self.offer(eng, obj, inc);
                return;
            };
            fixes.push((j as u32, up));
            self.apply_fixes(eng, &fixes);
            match self.solve_node(eng, self.cutoff(inc)) {
                NodeLp::Solved(_) => {}
                _ => return,
            }
        }
    }

    /// Objective-guided dive: binaries that carry a cost are pushed to their
    /// cheap bound one at a time, the least used first, and set the other
    /// way only when the cheap bound is infeasible. Ends in a fractional dive.
    fn cost_dive(&self, eng: &mut Engine, fixes: &[(u32, bool)], inc: &mut Option<Incumbent>) {
        let maximize = self.model.objective().sense == Sense::Maximize;
        let cheap_up: HashMap<usize, bool> =
            binary_costs(self.model).into_iter().map(|(j, c)| (j, (c < 0.0) != maximize)).collect();
        if cheap_up.is_empty() {
            return;
        }
        let mut fixes = fixes.to_vec();
        let mut fixed: HashSet<usize> = fixes.iter().map(|f| f.0 as usize).collect();
        loop {
            let mut pick: Option<(usize, bool, f64)> = None;
            for &j in &self.bins {
                let Some(&up) = cheap_up.get(&j) else { continue };
                if fixed.contains(&j) {
                    continue;
                }
                let v = self.value(eng, j);
                let dist = if up { 1.0 - v } else { v };
                if dist > self.opts.tol_int && pick.is_none_or(|(_, _, d)| dist < d) {
                    pick = Some((j, up, dist));
                }
            }
            let Some((j, up, _)) = pick else { break };
            fixed.insert(j);
            fixes.push((j as u32, up));
            self.apply_fixes(eng, &fixes);
            if let NodeLp::Solved(_) = self.solve_node(eng, f64::INFINITY) {
                continue;
            }
            fixes.last_mut().expect("just pushed").1 = !up;
            self.apply_fixes(eng, &fixes);
            if !matches!(self.solve_node(eng, f64::INFINITY), NodeLp::Solved(_)) {
                return;
            }
        }
        self.dive(eng, &fixes, inc);
    }

    /// Fixes every binary with positive relaxation value to one and the rest to zero.
    fn round_up(&self, eng: &mut Engine, inc: &mut Option<Incumbent>) {
        let fixes: Vec<(u32, bool)> =
            self.bins.iter().map(|&j| (j as u32, self.value(eng, j) > self.opts.tol_int)).collect();
        self.apply_fixes(eng, &fixes);
        if let NodeLp::Solved(obj) = self.solve_node(eng, self.cutoff(inc)) {
            self.offer(eng, obj, inc);
        }
    }

    fn run(&self, warm: Option<&Basis>, start: Option<Vec<f64>>) -> Solution {
        let started = Instant::now();
        let mut eng = Engine::new(&self.form, &self.opts.lp);
        if let Some(b) = warm {
            eng.set_basis(&map_basis(self.model, b, &eng));
        }
        let mut inc: Option<Incumbent> = None;
        if let Some(vals) = start {
            let integral = self.bins.iter().all(|&j| (vals[j] - vals[j].round()).abs() <= self.opts.tol_int);
            if integral && self.model.max_violation(&vals) <= self.opts.lp.tol_feas {
                // Fix the binaries and polish the continuous part from this point.
                let fixes: Vec<(u32, bool)> = self.bins.iter().map(|&j| (j as u32, vals[j] > 0.5)).collect();
                self.apply_fixes(&mut eng, &fixes);
                if let NodeLp::Solved(obj) = self.solve_node(&mut eng, f64::INFINITY) {
                    self.offer(&eng, obj, &mut inc);
                }
            }
        }

        let mut heap = BinaryHeap::new();
        let mut next_id = 0u64;
        heap.push(Node {
            bound: f64::NEG_INFINITY,
            depth: 0,
            id: next_id,
            fixes: Vec::new(),
            basis: Arc::new(eng.basis_states().to_vec()),
        });
        next_id += 1;
        let mut nodes = 0u64;
        let mut limit_hit = false;
        let mut failed_nodes = 0u64;
        // Lowest bound among subtrees discarded against the incumbent.
        let mut pruned_bound = f64::INFINITY;

        while let Some(node) = heap.peek() {
            let cutoff = self.cutoff(&inc);
            if node.bound >= cutoff {
                // Best-bound order: every remaining node is dominated.
                pruned_bound = pruned_bound.min(node.bound);
                heap.clear();
                break;
            }
            if nodes >= self.opts.node_limit || self.opts.time_limit.is_some_and(|t| started.elapsed() >= t) {
                limit_hit = true;
                break;
            }
            let node = heap.pop().expect("peeked");
            nodes += 1;
            self.apply_fixes(&mut eng, &node.fixes);
            if eng.basis_states() != node.basis.as_slice() {
                eng.set_basis(&node.basis);
            }
            let obj = match self.solve_node(&mut eng, cutoff) {
                NodeLp::Solved(obj) => obj,
                NodeLp::Infeasible => continue,
                NodeLp::Dominated(c) => {
                    pruned_bound = pruned_bound.min(c);
                    continue;
                }
                NodeLp::Failed(Status::Unbounded) => {
                    // An unbounded relaxation says nothing about integer
                    // feasibility until every binary is fixed.
                    let fixed: Vec<u32> = node.fixes.iter().map(|f| f.0).collect();
                    let Some(&j) = self.bins.iter().find(|&&j| !fixed.contains(&(j as u32))) else {
                        let mut s = Solution::empty(Status::Unbounded);
                        s.iterations = eng.iterations;
                        s.nodes = nodes;
                        return s;
                    };
                    let basis = Arc::new(eng.basis_states().to_vec());
                    for up in [false, true] {
                        let mut fixes = node.fixes.clone();
                        fixes.push((j as u32, up));
                        heap.push(Node {
                            bound: f64::NEG_INFINITY,
                            depth: node.depth + 1,
                            id: next_id,
                            fixes,
                            basis: Arc::clone(&basis),
                        });
                        next_id += 1;
                    }
                    continue;
                }
                NodeLp::Failed(status) => {
                    if node.depth == 0 {
                        let mut s = Solution::empty(status);
                        s.iterations = eng.iterations;
                        s.nodes = nodes;
                        return s;
                    }
                    failed_nodes += 1;
                    continue;
                }
            };
            let Some((j, v)) = self.branching_var(&eng) else {
                self.offer(&eng, obj, &mut inc);
                continue;
            };
            let basis = Arc::new(eng.basis_states().to_vec());
            if node.depth == 0 {
                self.round_up(&mut eng, &mut inc);
                self.apply_fixes(&mut eng, &node.fixes);
                eng.set_basis(&basis);
                if let NodeLp::Solved(_) = self.solve_node(&mut eng, f64::INFINITY) {
                    self.dive(&mut eng, &node.fixes, &mut inc);
                }
                self.apply_fixes(&mut eng, &node.fixes);
                eng.set_basis(&basis);
                if let NodeLp::Solved(_) = self.solve_node(&mut eng, f64::INFINITY) {
                    self.cost_dive(&mut eng, &node.fixes, &mut inc);
                }
                eng.set_basis(&basis);
            }
            let first_up = v >= 0.5;
            for up in [first_up, !first_up] {
                let mut fixes = node.fixes.clone();
                fixes.push((j as u32, up));
                heap.push(Node { bound: obj, depth: node.depth + 1, id: next_id, fixes, basis: Arc::clone(&basis) });
                next_id += 1;
            }
        }

        if let Some(n) = heap.peek() {
            pruned_bound = pruned_bound.min(n.bound);
        }
        match inc {
            None => {
                let status = if limit_hit {
                    Status::NodeLimit
                } else if failed_nodes > 0 {
                    Status::NumericFailure
                } else {
                    Status::Infeasible
                };
                let mut s = Solution::empty(status);
                s.iterations = eng.iterations;
                s.nodes = nodes;
                s
            }
            Some(i) => {
                let gap = if pruned_bound < i.obj {
                    (i.obj - pruned_bound) / (i.obj.abs() + 1e-10)
                } else {
                    0.0
                };
                let status = if (limit_hit && gap > self.opts.gap) || failed_nodes > 0 {
                    Status::Feasible
                } else {
                    Status::Optimal
                };
                let vals: Vec<f64> = (0..self.form.n).map(|j| i.x[j] * self.form.col_scale[j]).collect();
                let mut s = Solution::empty(status);
                s.objective = self.model.evaluate_objective(&vals);
                s.values = self.model.vars().iter().zip(&vals).map(|(v, &x)| (v.name.clone(), x)).collect();
                s.basis = Some(basis_by_name(self.model, &i.basis));
                s.gap = gap.is_finite().then_some(gap);
                s.iterations = eng.iterations;
                s.nodes = nodes;
                s
            }
        }
    }
}
