//! Path-based program builder. Each template adds a named group of
//! variables and rows to a [`ProgramModel`]; variable names follow a fixed
//! scheme so custom rows and objectives can refer to them.

mod audit;
mod capacity;
mod objective;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use pathopt_lp::{Backend, BundledSolver, MilpOptions, ModelError, ProgramModel, Relation, Solution, VarKind};
use thiserror::Error;

use crate::pathgen::{AnnotatedPath, PathSet};
use crate::topology::{LinkId, NodeId, Topology};
use crate::traffic::{TrafficClass, TrafficMatrix};

pub use audit::{AuditReport, Violation};
pub use capacity::{default_link_fn, link_caps_from_topology, node_caps_from_topology, LinkCapFn, NodeCapFn};
pub use objective::{ChurnBase, DiffMode, PredefinedObjective, PrevSolution, RoutingCostFn};

#[derive(Debug, Error, PartialEq)]
pub enum OptError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("class {0} has no paths")]
    MissingPaths(u32),
    #[error("class {0} is not part of this optimization")]
    UnknownClass(u32),
    #[error("link {0}->{1} is not in the topology")]
    UnknownLink(NodeId, NodeId),
    #[error("node {0} is not in the topology")]
    UnknownNode(NodeId),
    #[error("template {0} was already applied")]
    DuplicateTemplate(String),
    #[error("{template} requires {missing}")]
    MissingPrerequisite { template: &'static str, missing: String },
    #[error("name {0:?} may only contain ASCII letters, digits, '_' and '.'")]
    BadName(String),
    #[error("churn weight {0} is outside [0, 1]")]
    BadWeight(f64),
    #[error("invalid capacity {1} for {0}")]
    BadCapacity(String, f64),
}

/// Kinds of activation binaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryKind {
    Path,
    Node,
    Edge,
}

pub fn xp_name(class: u32, path: usize) -> String {
    format!("xp_c{class}_p{path}")
}

pub fn bp_name(class: u32, path: usize) -> String {
    format!("bp_c{class}_p{path}")
}

pub fn al_name(class: u32) -> String {
    format!("al_c{class}")
}

pub fn bn_name(v: NodeId) -> String {
    format!("bn_{v}")
}

pub fn be_name((s, d): LinkId) -> String {
    format!("be_{s}_{d}")
}

pub fn nc_name(v: NodeId, r: &str) -> String {
    format!("nc_{v}_{r}")
}

pub fn nl_name(v: NodeId, r: &str) -> String {
    format!("nl_{v}_{r}")
}

pub fn el_name((s, d): LinkId, r: &str) -> String {
    format!("el_{s}_{d}_{r}")
}

fn check_name(s: &str) -> Result<(), OptError> {
    let ok = !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
    if ok {
        Ok(())
    } else {
        Err(OptError::BadName(s.to_string()))
    }
}

/// One class with its paths and variable indices.
#[derive(Clone, Debug)]
pub(crate) struct ClassVars {
    pub tc: TrafficClass,
    pub paths: Vec<AnnotatedPath>,
    pub xp: Vec<usize>,
    pub al: usize,
    pub bp: Vec<usize>,
}

/// A load variable with its defining terms and the capacity that bounds it.
#[derive(Clone, Debug)]
pub(crate) struct LoadVar {
    pub var: usize,
    pub terms: Vec<(usize, f64)>,
    /// `nc` variable for nodes, `None` for links bounded by `cap`.
    pub cap_var: Option<usize>,
    pub cap: f64,
}

/// Builder for one path-based program over a fixed topology, traffic
/// matrix and path set. Single writer; the compiled model is a plain value.
pub struct OptBuilder<'a> {
    pub(crate) topo: &'a Topology,
    pub(crate) model: ProgramModel,
    pub(crate) classes: Vec<ClassVars>,
    pub(crate) class_pos: HashMap<u32, usize>,
    pub(crate) applied: BTreeSet<String>,
    pub(crate) bn: BTreeMap<NodeId, usize>,
    pub(crate) be: BTreeMap<LinkId, usize>,
    /// Load variables keyed by resource, then element.
    pub(crate) node_loads: BTreeMap<String, BTreeMap<NodeId, LoadVar>>,
    pub(crate) link_loads: BTreeMap<String, BTreeMap<LinkId, LoadVar>>,
    /// To-be-allocated node capacities: resource → node → linking constant.
    pub(crate) tba: BTreeMap<String, BTreeMap<NodeId, f64>>,
    /// Classes and paths with an `x ≤ bp` row.
    pub(crate) disabled_rows: BTreeSet<(usize, usize)>,
    pub(crate) require_all: BTreeSet<usize>,
    pub(crate) require_some: BTreeSet<usize>,
    pub(crate) require_edges: BTreeSet<usize>,
    pub(crate) max_vars: BTreeMap<String, usize>,
}

impl<'a> OptBuilder<'a> {
    /// Registers `xp` and `al` for every class of `tm`, in matrix order.
    pub fn new(topo: &'a Topology, tm: &TrafficMatrix, paths: &PathSet) -> Result<Self, OptError> {
        let mut model = ProgramModel::new();
        let mut classes = Vec::with_capacity(tm.len());
        let mut class_pos = HashMap::new();
        for tc in &tm.classes {
            let ps = paths.get(tc.id);
            if ps.is_empty() {
                return Err(OptError::MissingPaths(tc.id));
            }
            let xp = (0..ps.len())
                .map(|i| model.add_var(&xp_name(tc.id, i), 0.0, 1.0, VarKind::Continuous))
                .collect::<Result<Vec<_>, _>>()?;
            let al = model.add_var(&al_name(tc.id), 0.0, 1.0, VarKind::Continuous)?;
            class_pos.insert(tc.id, classes.len());
            classes.push(ClassVars { tc: tc.clone(), paths: ps.to_vec(), xp, al, bp: Vec::new() });
        }
        Ok(OptBuilder {
            topo,
            model,
            classes,
            class_pos,
            applied: BTreeSet::new(),
            bn: BTreeMap::new(),
            be: BTreeMap::new(),
            node_loads: BTreeMap::new(),
            link_loads: BTreeMap::new(),
            tba: BTreeMap::new(),
            disabled_rows: BTreeSet::new(),
            require_all: BTreeSet::new(),
            require_some: BTreeSet::new(),
            require_edges: BTreeSet::new(),
            max_vars: BTreeMap::new(),
        })
    }

    pub fn model(&self) -> &ProgramModel {
        &self.model
    }

    pub fn into_model(self) -> ProgramModel {
        self.model
    }

    pub fn topology(&self) -> &Topology {
        self.topo
    }

    /// Class ids in registration order.
    pub fn class_ids(&self) -> Vec<u32> {
        self.classes.iter().map(|c| c.tc.id).collect()
    }

    pub fn paths(&self, class: u32) -> Option<&[AnnotatedPath]> {
        self.class_pos.get(&class).map(|&i| self.classes[i].paths.as_slice())
    }

    pub fn has_template(&self, name: &str) -> bool {
        self.applied.contains(name)
    }

    pub(crate) fn mark(&mut self, key: impl Into<String>) -> Result<(), OptError> {
        let key = key.into();
        if !self.applied.insert(key.clone()) {
            return Err(OptError::DuplicateTemplate(key));
        }
        Ok(())
    }

    pub(crate) fn require(&self, template: &'static str, key: &str) -> Result<(), OptError> {
        if self.applied.contains(key) {
            Ok(())
        } else {
            Err(OptError::MissingPrerequisite { template, missing: key.to_string() })
        }
    }

    /// Positions of `ids` in the class table, sorted and deduplicated.
    pub(crate) fn positions(&self, ids: &[u32]) -> Result<Vec<usize>, OptError> {
        let mut out: Vec<usize> =
            ids.iter().map(|c| self.class_pos.get(c).copied().ok_or(OptError::UnknownClass(*c))).collect::<Result<_, _>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub(crate) fn add_row(
        &mut self,
        name: String,
        terms: Vec<(usize, f64)>,
        rel: Relation,
        rhs: f64,
    ) -> Result<usize, OptError> {
        Ok(self.model.add_constraint(&name, terms, rel, rhs)?)
    }

    /// Adds the requested activation binaries: `bp` per (class, path), `bn`
    /// per node and `be` per directed link.
    pub fn add_binary_variables(&mut self, kinds: &[BinaryKind]) -> Result<(), OptError> {
        let kinds: BTreeSet<BinaryKind> = kinds.iter().copied().collect();
        for k in &kinds {
            let key = match k {
                BinaryKind::Path => "binary_path",
                BinaryKind::Node => "binary_node",
                BinaryKind::Edge => "binary_edge",
            };
            if self.applied.contains(key) {
                return Err(OptError::DuplicateTemplate(key.into()));
            }
        }
        for k in kinds {
            match k {
                BinaryKind::Path => {
                    self.mark("binary_path")?;
                    for ci in 0..self.classes.len() {
                        let id = self.classes[ci].tc.id;
                        let n = self.classes[ci].paths.len();
                        let bp = (0..n)
                            .map(|i| self.model.add_var(&bp_name(id, i), 0.0, 1.0, VarKind::Binary))
                            .collect::<Result<Vec<_>, _>>()?;
                        self.classes[ci].bp = bp;
                    }
                }
                BinaryKind::Node => {
                    self.mark("binary_node")?;
                    for n in self.topo.nodes() {
                        let v = self.model.add_var(&bn_name(n.id), 0.0, 1.0, VarKind::Binary)?;
                        self.bn.insert(n.id, v);
                    }
                    self.link_tba_nodes()?;
                }
                BinaryKind::Edge => {
                    self.mark("binary_edge")?;
                    for l in self.topo.links() {
                        let v = self.model.add_var(&be_name(l.id()), 0.0, 1.0, VarKind::Binary)?;
                        self.be.insert(l.id(), v);
                    }
                }
            }
        }
        Ok(())
    }

    /// `Σ_p x_{c,p} − a_c = 0` for every class.
    pub fn add_allocate_flow(&mut self) -> Result<(), OptError> {
        self.mark("allocate_flow")?;
        for ci in 0..self.classes.len() {
            let c = &self.classes[ci];
            let mut terms: Vec<(usize, f64)> = c.xp.iter().map(|&x| (x, 1.0)).collect();
            terms.push((c.al, -1.0));
            self.add_row(format!("alloc_c{}", c.tc.id), terms, Relation::Eq, 0.0)?;
        }
        Ok(())
    }

    /// `a_c = 1` for each class in `classes`.
    pub fn add_route_all(&mut self, classes: &[u32]) -> Result<(), OptError> {
        self.require("route_all", "allocate_flow")?;
        let pos = self.positions(classes)?;
        self.mark("route_all")?;
        for ci in pos {
            let c = &self.classes[ci];
            self.add_row(format!("routeall_c{}", c.tc.id), vec![(c.al, 1.0)], Relation::Eq, 1.0)?;
        }
        Ok(())
    }

    /// `x ≤ bp`, shared by path disabling and single-path enforcement.
    fn ensure_disable_rows(&mut self, ci: usize) -> Result<(), OptError> {
        for pi in 0..self.classes[ci].paths.len() {
            if self.disabled_rows.insert((ci, pi)) {
                let c = &self.classes[ci];
                let terms = vec![(c.xp[pi], 1.0), (c.bp[pi], -1.0)];
                self.add_row(format!("pathdis_c{}_p{}", c.tc.id, pi), terms, Relation::Le, 0.0)?;
            }
        }
        Ok(())
    }

    /// At most one enabled path per listed class: `Σ_p bp ≤ 1` and `x ≤ bp`.
    pub fn add_enforce_single_path(&mut self, classes: &[u32]) -> Result<(), OptError> {
        self.require("enforce_single_path", "binary_path")?;
        let pos = self.positions(classes)?;
        self.mark("enforce_single_path")?;
        for ci in pos {
            let c = &self.classes[ci];
            let terms = c.bp.iter().map(|&b| (b, 1.0)).collect();
            self.add_row(format!("single_c{}", c.tc.id), terms, Relation::Le, 1.0)?;
            self.ensure_disable_rows(ci)?;
        }
        Ok(())
    }

    /// `x_{c,p} ≤ bp_{c,p}`: a disabled path carries no traffic.
    pub fn add_path_disable(&mut self, classes: &[u32]) -> Result<(), OptError> {
        self.require("path_disable", "binary_path")?;
        let pos = self.positions(classes)?;
        self.mark("path_disable")?;
        for ci in pos {
            self.ensure_disable_rows(ci)?;
        }
        Ok(())
    }

    /// `bp ≤ bn(v)` for every node `v` on the path.
    pub fn add_require_all_nodes(&mut self, classes: &[u32]) -> Result<(), OptError> {
        self.require("require_all_nodes", "binary_path")?;
        self.require("require_all_nodes", "binary_node")?;
        let pos = self.positions(classes)?;
        self.mark("require_all_nodes")?;
        for ci in pos {
            self.require_all.insert(ci);
            for pi in 0..self.classes[ci].paths.len() {
                let c = &self.classes[ci];
                let rows: Vec<(String, Vec<(usize, f64)>)> = c.paths[pi]
                    .nodes
                    .iter()
                    .map(|v| (format!("reqnode_c{}_p{}_{}", c.tc.id, pi, v), vec![(c.bp[pi], 1.0), (self.bn[v], -1.0)]))
                    .collect();
                for (name, terms) in rows {
                    self.add_row(name, terms, Relation::Le, 0.0)?;
                }
            }
        }
        Ok(())
    }

    /// `bp ≤ Σ_{v∈p} bn(v)`: a path is usable if some node on it is enabled.
    pub fn add_require_some_nodes(&mut self, classes: &[u32]) -> Result<(), OptError> {
        self.require("require_some_nodes", "binary_path")?;
        self.require("require_some_nodes", "binary_node")?;
        let pos = self.positions(classes)?;
        self.mark("require_some_nodes")?;
        for ci in pos {
            self.require_some.insert(ci);
            for pi in 0..self.classes[ci].paths.len() {
                let c = &self.classes[ci];
                let mut terms = vec![(c.bp[pi], 1.0)];
                terms.extend(c.paths[pi].nodes.iter().map(|v| (self.bn[v], -1.0)));
                self.add_row(format!("reqsome_c{}_p{}", c.tc.id, pi), terms, Relation::Le, 0.0)?;
            }
        }
        Ok(())
    }

    /// `bp ≤ be(l)` for every link `l` on the path.
    pub fn add_require_all_edges(&mut self, classes: &[u32]) -> Result<(), OptError> {
        self.require("require_all_edges", "binary_path")?;
        self.require("require_all_edges", "binary_edge")?;
        let pos = self.positions(classes)?;
        self.mark("require_all_edges")?;
        for ci in pos {
            self.require_edges.insert(ci);
            for pi in 0..self.classes[ci].paths.len() {
                let c = &self.classes[ci];
                let rows: Vec<(String, Vec<(usize, f64)>)> = c.paths[pi]
                    .links()
                    .map(|l| (format!("reqedge_c{}_p{}_{}_{}", c.tc.id, pi, l.0, l.1), vec![(c.bp[pi], 1.0), (self.be[&l], -1.0)]))
                    .collect();
                for (name, terms) in rows {
                    self.add_row(name, terms, Relation::Le, 0.0)?;
                }
            }
        }
        Ok(())
    }

    /// `Σ_v cost(v)·bn(v) ≤ k`.
    pub fn add_budget(&mut self, cost: &dyn Fn(NodeId) -> f64, k: f64) -> Result<(), OptError> {
        self.require("budget", "binary_node")?;
        self.mark("budget")?;
        let terms = self.bn.iter().map(|(v, &b)| (b, cost(*v))).collect();
        self.add_row("budget".into(), terms, Relation::Le, k)?;
        Ok(())
    }

    /// Solves with the bundled solver.
    pub fn solve(&self, opts: &MilpOptions) -> Solution {
        BundledSolver.solve(&self.model, opts)
    }

    pub fn solve_with(&self, backend: &dyn Backend, opts: &MilpOptions) -> Solution {
        backend.solve(&self.model, opts)
    }

    /// Per class, the `x` value of each path (0 when the solution has none).
    pub fn path_fractions(&self, sol: &Solution) -> BTreeMap<u32, Vec<f64>> {
        self.classes
            .iter()
            .map(|c| {
                let xs = (0..c.paths.len()).map(|i| sol.value(&xp_name(c.tc.id, i)).unwrap_or(0.0)).collect();
                (c.tc.id, xs)
            })
            .collect()
    }

    /// Paths whose `x` exceeds `tol`, per class.
    pub fn flow_paths(&self, sol: &Solution, tol: f64) -> BTreeMap<u32, Vec<(usize, f64)>> {
        self.path_fractions(sol)
            .into_iter()
            .map(|(c, xs)| (c, xs.into_iter().enumerate().filter(|(_, x)| *x > tol).collect()))
            .collect()
    }
}
