use std::collections::BTreeMap;

use pathopt_lp::{Relation, Sense, Solution, VarKind};

use super::{check_name, xp_name, OptBuilder, OptError};
use crate::pathgen::{AnnotatedPath, PathSet};
use crate::traffic::TrafficClass;

/// Cost of routing class `c` along path `p`, charged per unit of `x`.
pub type RoutingCostFn<'f> = dyn Fn(&TrafficClass, &AnnotatedPath) -> f64 + 'f;

#[derive(Clone, Debug, PartialEq)]
pub enum PredefinedObjective {
    /// Maximize `Σ_c a_c`.
    MaxAllFlow,
    /// Maximize `Σ_c priority_c·a_c`.
    MaxWeightedFlow,
    /// Minimize the largest node load of a resource.
    MinMaxNodeLoad(String),
    /// Minimize the largest link load of a resource.
    MinMaxLinkLoad(String),
    /// Minimize `Σ_{c,p} cost(c,p)·x_{c,p}`.
    MinRoutingCost,
}

/// Load whose maximum the churn objective trades against `Diff`.
#[derive(Clone, Debug, PartialEq)]
pub enum ChurnBase {
    MaxNodeLoad(String),
    MaxLinkLoad(String),
}

/// How the per-path changes `ε` combine into `Diff`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DiffMode {
    #[default]
    Max,
    Sum,
}

/// Path fractions of an earlier solve, keyed by class and path so they
/// survive reselection. Absent pairs count as 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrevSolution {
    values: BTreeMap<(u32, AnnotatedPath), f64>,
}

impl PrevSolution {
    pub fn new(values: BTreeMap<(u32, AnnotatedPath), f64>) -> Result<Self, OptError> {
        if let Some(((c, _), v)) = values.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(OptError::BadCapacity(format!("previous fraction of class {c}"), *v));
        }
        Ok(PrevSolution { values })
    }

    /// Reads the `xp` values of `sol` for the paths of `selected`.
    /// Round-off outside [0, 1] is clamped.
    pub fn from_solution(selected: &PathSet, sol: &Solution) -> Self {
        let mut values = BTreeMap::new();
        for (c, paths) in selected.iter() {
            for (i, p) in paths.iter().enumerate() {
                if let Some(x) = sol.value(&xp_name(c, i)) {
                    values.insert((c, p.clone()), x.clamp(0.0, 1.0));
                }
            }
        }
        PrevSolution { values }
    }

    pub fn get(&self, class: u32, path: &AnnotatedPath) -> f64 {
        self.values.get(&(class, path.clone())).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl OptBuilder<'_> {
    fn resolve(&self, name: &str) -> Result<usize, OptError> {
        self.model.var_index(name).ok_or_else(|| OptError::Model(pathopt_lp::ModelError::UnknownVariable(name.into())))
    }

    /// Variable `M` with `load ≤ M` for every load of the resource.
    pub(crate) fn ensure_max_var(&mut self, base: &ChurnBase) -> Result<usize, OptError> {
        let (key, loads): (String, Vec<(String, usize)>) = match base {
            ChurnBase::MaxNodeLoad(r) => (
                format!("maxload_node_{r}"),
                self.node_loads.get(r).map_or_else(Vec::new, |m| {
                    m.iter().map(|(v, l)| (format!("mm_{v}_{r}"), l.var)).collect()
                }),
            ),
            ChurnBase::MaxLinkLoad(r) => (
                format!("maxload_link_{r}"),
                self.link_loads.get(r).map_or_else(Vec::new, |m| {
                    m.iter().map(|((s, d), l)| (format!("mm_{s}_{d}_{r}"), l.var)).collect()
                }),
            ),
        };
        if let Some(&m) = self.max_vars.get(&key) {
            return Ok(m);
        }
        if loads.is_empty() {
            return Err(OptError::MissingPrerequisite { template: "min-max objective", missing: format!("loads for {key}") });
        }
        let m = self.model.add_var(&key, 0.0, f64::INFINITY, VarKind::Continuous)?;
        for (name, load) in loads {
            self.add_row(name, vec![(load, 1.0), (m, -1.0)], Relation::Le, 0.0)?;
        }
        self.max_vars.insert(key, m);
        Ok(m)
    }

    /// Installs one of the common objectives. Min-max forms use an
    /// auxiliary `M` bounded below by each load. `cost` is required for
    /// `MinRoutingCost`.
    pub fn set_predefined_objective(
        &mut self,
        obj: &PredefinedObjective,
        cost: Option<&RoutingCostFn<'_>>,
    ) -> Result<(), OptError> {
        match obj {
            PredefinedObjective::MaxAllFlow | PredefinedObjective::MaxWeightedFlow => {
                self.require("max flow objective", "allocate_flow")?;
                let weighted = *obj == PredefinedObjective::MaxWeightedFlow;
                let terms: Vec<(usize, f64)> =
                    self.classes.iter().map(|c| (c.al, if weighted { c.tc.priority } else { 1.0 })).collect();
                self.model.set_objective(Sense::Maximize, terms)?;
            }
            PredefinedObjective::MinMaxNodeLoad(r) => {
                let m = self.ensure_max_var(&ChurnBase::MaxNodeLoad(r.clone()))?;
                self.model.set_objective(Sense::Minimize, [(m, 1.0)])?;
            }
            PredefinedObjective::MinMaxLinkLoad(r) => {
                let m = self.ensure_max_var(&ChurnBase::MaxLinkLoad(r.clone()))?;
                self.model.set_objective(Sense::Minimize, [(m, 1.0)])?;
            }
            PredefinedObjective::MinRoutingCost => {
                let f = cost.ok_or(OptError::MissingPrerequisite {
                    template: "min routing cost objective",
                    missing: "a routing cost function".into(),
                })?;
                let mut terms = Vec::new();
                for c in &self.classes {
                    for (p, &x) in c.paths.iter().zip(&c.xp) {
                        terms.push((x, f(&c.tc, p)));
                    }
                }
                self.model.set_objective(Sense::Minimize, terms)?;
            }
        }
        Ok(())
    }

    /// New continuous variable `name ∈ [lb, ub]` equal to `Σ coef·var`.
    pub fn define_var(&mut self, name: &str, coeffs: &[(&str, f64)], lb: f64, ub: f64) -> Result<usize, OptError> {
        check_name(name)?;
        let terms: Vec<(usize, f64)> =
            coeffs.iter().map(|(n, k)| self.resolve(n).map(|j| (j, *k))).collect::<Result<_, _>>()?;
        let v = self.model.add_var(name, lb, ub, VarKind::Continuous)?;
        let mut row = vec![(v, 1.0)];
        row.extend(terms.into_iter().map(|(j, k)| (j, -k)));
        self.add_row(format!("def_{name}"), row, Relation::Eq, 0.0)?;
        Ok(v)
    }

    /// Replaces the objective with `Σ coef·var`.
    pub fn set_objective(&mut self, coeffs: &[(&str, f64)], sense: Sense) -> Result<(), OptError> {
        let terms: Vec<(usize, f64)> =
            coeffs.iter().map(|(n, k)| self.resolve(n).map(|j| (j, *k))).collect::<Result<_, _>>()?;
        self.model.set_objective(sense, terms)?;
        Ok(())
    }

    /// Largest load of the base resource in `sol`, recomputed from the load
    /// definitions so it does not depend on how tight `M` ended up.
    /// `None` when no such loads exist.
    pub fn max_load(&self, sol: &Solution, base: &ChurnBase) -> Option<f64> {
        let loads: Vec<&[(usize, f64)]> = match base {
            ChurnBase::MaxNodeLoad(r) => self.node_loads.get(r)?.values().map(|l| l.terms.as_slice()).collect(),
            ChurnBase::MaxLinkLoad(r) => self.link_loads.get(r)?.values().map(|l| l.terms.as_slice()).collect(),
        };
        let val = |j: usize| sol.value(&self.model.var(j).name).unwrap_or(0.0);
        loads.iter().map(|t| t.iter().map(|&(j, k)| k * val(j)).sum::<f64>()).reduce(f64::max)
    }

    /// Penalizes change from `prev`: `ε_{c,p} ≥ |x_{c,p} − x̄_{c,p}|`,
    /// `Diff` = max (or sum) of `ε`, and objective
    /// `min (1−w)·max load + w·Diff`.
    pub fn add_min_churn(&mut self, prev: &PrevSolution, w: f64, base: &ChurnBase, mode: DiffMode) -> Result<(), OptError> {
        if !(0.0..=1.0).contains(&w) {
            return Err(OptError::BadWeight(w));
        }
        let m = self.ensure_max_var(base)?;
        self.mark("min_churn")?;
        let diff = self.model.add_var("Diff", 0.0, f64::INFINITY, VarKind::Continuous)?;
        let mut eps_all = Vec::new();
        for ci in 0..self.classes.len() {
            for pi in 0..self.classes[ci].paths.len() {
                let c = &self.classes[ci];
                let (id, x) = (c.tc.id, c.xp[pi]);
                let xbar = prev.get(id, &c.paths[pi]);
                let eps = self.model.add_var(&format!("eps_c{id}_p{pi}"), 0.0, f64::INFINITY, VarKind::Continuous)?;
                self.add_row(format!("churnlo_c{id}_p{pi}"), vec![(x, 1.0), (eps, 1.0)], Relation::Ge, xbar)?;
                self.add_row(format!("churnhi_c{id}_p{pi}"), vec![(x, 1.0), (eps, -1.0)], Relation::Le, xbar)?;
                if mode == DiffMode::Max {
                    self.add_row(format!("diff_c{id}_p{pi}"), vec![(diff, 1.0), (eps, -1.0)], Relation::Ge, 0.0)?;
                }
                eps_all.push(eps);
            }
        }
        if mode == DiffMode::Sum {
            let mut row = vec![(diff, 1.0)];
            row.extend(eps_all.iter().map(|&e| (e, -1.0)));
            self.add_row("diff_sum".into(), row, Relation::Eq, 0.0)?;
        }
        self.model.set_objective(Sense::Minimize, [(m, 1.0 - w), (diff, w)])?;
        Ok(())
    }
}
