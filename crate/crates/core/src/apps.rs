//! Ready-made applications: each recipe fixes the path predicate, the
//! generation and selection defaults, and the templates and objective it
//! installs on a builder.

use std::collections::BTreeMap;

use pathopt_lp::{ProgramModel, Relation, Sense, VarKind};
use serde::Deserialize;
use thiserror::Error;

use crate::optmodel::{
    be_name, bn_name, link_caps_from_topology, node_caps_from_topology, BinaryKind, ChurnBase, OptBuilder, OptError,
    PredefinedObjective,
};
use crate::pathgen::{
    has_mbox_predicate, null_predicate, waypoint_predicate, AnnotatedPath, GenParams, PathPredicate, PathSet,
    SelectStrategy,
};
use crate::topology::{Capacity, LinkId, NodeId, Topology};
use crate::traffic::{TrafficClass, TrafficMatrix};

pub const BANDWIDTH: &str = "bandwidth";
pub const CPU: &str = "cpu";
pub const TCAM: &str = "tcam";

pub const DEFAULT_SELECT_NUMBER: usize = 5;

/// Service chain given to classes that do not carry one.
pub const SIMPLE_CHAIN: [&str; 2] = ["fw", "ids"];

/// Objective weights of switch and link power.
pub const SWITCH_POWER_WEIGHT: f64 = 0.75;
pub const LINK_POWER_WEIGHT: f64 = 0.25;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("unknown recipe {0:?} (expected te, te-shortest, simple, elastictree or elastic-scaling)")]
    UnknownRecipe(String),
    #[error("bad parameters for recipe {recipe}: {msg}")]
    BadParams { recipe: String, msg: String },
}

#[derive(Clone, Debug, PartialEq)]
pub enum RecipeKind {
    /// Route everything, minimize the largest normalized link load.
    Te,
    /// Route everything through fw then ids, minimize the largest CPU load
    /// under bandwidth and TCAM limits.
    Simple,
    /// Power off switches and links not needed by the chosen paths.
    /// Missing entries cost 1.
    ElasticTree { switch_power: BTreeMap<NodeId, f64>, link_power: BTreeMap<LinkId, f64> },
    /// Place middlebox capacity on at most `budget_fraction·|V|` nodes and
    /// minimize the largest CPU load.
    ElasticScaling { budget_fraction: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recipe {
    pub name: String,
    pub kind: RecipeKind,
    pub gen: GenParams,
    pub strategy: SelectStrategy,
    pub select_number: usize,
}

pub fn recipe_te() -> Recipe {
    Recipe {
        name: "te".into(),
        kind: RecipeKind::Te,
        gen: GenParams::default(),
        strategy: SelectStrategy::Random,
        select_number: DEFAULT_SELECT_NUMBER,
    }
}

/// TE on the shortest candidate paths, for latency-sensitive traffic.
pub fn recipe_te_shortest() -> Recipe {
    Recipe { name: "te-shortest".into(), strategy: SelectStrategy::Shortest, ..recipe_te() }
}

pub fn recipe_simple() -> Recipe {
    Recipe {
        name: "simple".into(),
        kind: RecipeKind::Simple,
        gen: GenParams { chain_len: SIMPLE_CHAIN.len(), ..GenParams::default() },
        strategy: SelectStrategy::Random,
        select_number: DEFAULT_SELECT_NUMBER,
    }
}

pub fn recipe_elastictree(switch_power: BTreeMap<NodeId, f64>, link_power: BTreeMap<LinkId, f64>) -> Recipe {
    Recipe {
        name: "elastictree".into(),
        kind: RecipeKind::ElasticTree { switch_power, link_power },
        gen: GenParams::default(),
        strategy: SelectStrategy::Random,
        select_number: DEFAULT_SELECT_NUMBER,
    }
}

pub fn recipe_elastic_scaling(budget_fraction: f64) -> Recipe {
    Recipe {
        name: "elastic-scaling".into(),
        kind: RecipeKind::ElasticScaling { budget_fraction },
        gen: GenParams { chain_len: 1, ..GenParams::default() },
        strategy: SelectStrategy::Random,
        select_number: DEFAULT_SELECT_NUMBER,
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkPower {
    src: NodeId,
    dst: NodeId,
    power: f64,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElasticTreeParams {
    #[serde(default)]
    switch_power: BTreeMap<NodeId, f64>,
    #[serde(default)]
    link_power: Vec<LinkPower>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalingParams {
    #[serde(default = "half")]
    budget_fraction: f64,
}

fn half() -> f64 {
    0.5
}

/// Looks a recipe up by name. `params` is the recipe-specific JSON object
/// (`null` for defaults):
///
/// - elastictree: `{"switch_power": {"<node>": w}, "link_power": [{"src", "dst", "power"}]}`
/// - elastic-scaling: `{"budget_fraction": 0.5}`
pub fn recipe_by_name(name: &str, params: &serde_json::Value) -> Result<Recipe, AppError> {
    let bad = |e: serde_json::Error| AppError::BadParams { recipe: name.into(), msg: e.to_string() };
    let params = if params.is_null() { serde_json::Value::Object(Default::default()) } else { params.clone() };
    let no_params = |p: &serde_json::Value| match p.as_object() {
        Some(m) if m.is_empty() => Ok(()),
        _ => Err(AppError::BadParams { recipe: name.into(), msg: "takes no parameters".into() }),
    };
    match name {
        "te" => no_params(&params).map(|_| recipe_te()),
        "te-shortest" => no_params(&params).map(|_| recipe_te_shortest()),
        "simple" => no_params(&params).map(|_| recipe_simple()),
        "elastictree" => {
            let p: ElasticTreeParams = serde_json::from_value(params).map_err(bad)?;
            let links = p.link_power.into_iter().map(|l| ((l.src, l.dst), l.power)).collect();
            Ok(recipe_elastictree(p.switch_power, links))
        }
        "elastic-scaling" => {
            let p: ScalingParams = serde_json::from_value(params).map_err(bad)?;
            if !(0.0..=1.0).contains(&p.budget_fraction) {
                return Err(AppError::BadParams { recipe: name.into(), msg: format!("budget_fraction {}", p.budget_fraction) });
            }
            Ok(recipe_elastic_scaling(p.budget_fraction))
        }
        other => Err(AppError::UnknownRecipe(other.into())),
    }
}

fn as_refs(v: &[(String, f64)]) -> Vec<(&str, f64)> {
    v.iter().map(|(n, k)| (n.as_str(), *k)).collect()
}

/// Classes with positive volume. Routing a zero-volume class would force
/// equipment on for nothing.
fn demanding(tm: &[TrafficClass]) -> Vec<u32> {
    tm.iter().filter(|c| c.vol_bytes > 0.0).map(|c| c.id).collect()
}

impl Recipe {
    pub fn predicate(&self) -> Box<dyn PathPredicate> {
        match self.kind {
            RecipeKind::Te | RecipeKind::ElasticTree { .. } => Box::new(null_predicate()),
            RecipeKind::Simple => Box::new(waypoint_predicate(SIMPLE_CHAIN)),
            RecipeKind::ElasticScaling { .. } => Box::new(has_mbox_predicate()),
        }
    }

    /// Traffic as the recipe sees it: SIMPLE gives chainless classes the
    /// fw, ids chain. Other recipes use the matrix unchanged.
    pub fn prepare_traffic(&self, tm: &TrafficMatrix) -> TrafficMatrix {
        match self.kind {
            RecipeKind::Simple => TrafficMatrix {
                classes: tm
                    .classes
                    .iter()
                    .map(|c| if c.chain.is_empty() { c.clone().with_chain(SIMPLE_CHAIN) } else { c.clone() })
                    .collect(),
            },
            _ => tm.clone(),
        }
    }

    /// Load whose maximum a churn-aware re-solve trades against change;
    /// `None` for recipes without a min-max objective.
    pub fn churn_base(&self) -> Option<ChurnBase> {
        match self.kind {
            RecipeKind::Te => Some(ChurnBase::MaxLinkLoad(BANDWIDTH.into())),
            RecipeKind::Simple | RecipeKind::ElasticScaling { .. } => Some(ChurnBase::MaxNodeLoad(CPU.into())),
            RecipeKind::ElasticTree { .. } => None,
        }
    }

    /// New builder over `paths` with the recipe's templates and objective.
    pub fn build<'a>(&self, topo: &'a Topology, tm: &TrafficMatrix, paths: &PathSet) -> Result<OptBuilder<'a>, OptError> {
        let mut b = OptBuilder::new(topo, tm, paths)?;
        self.configure(&mut b, tm)?;
        Ok(b)
    }

    /// Applies the templates and objective to a fresh builder.
    pub fn configure(&self, b: &mut OptBuilder<'_>, tm: &TrafficMatrix) -> Result<(), OptError> {
        let topo = b.topology().clone();
        let all = b.class_ids();
        match &self.kind {
            RecipeKind::Te => {
                b.add_allocate_flow()?;
                b.add_route_all(&all)?;
                // Loads are normalized by capacity, so every link has capacity 1.
                let caps = link_caps_from_topology(&topo, BANDWIDTH);
                // A zero-capacity link keeps capacity 0 and raw volume.
                let unit = caps.iter().map(|(l, c)| (*l, if *c > 0.0 { 1.0 } else { 0.0 })).collect();
                let f = |l: LinkId, tc: &TrafficClass, _: &AnnotatedPath, _: &str| match caps[&l] {
                    c if c > 0.0 => tc.vol_bytes / c,
                    _ => tc.vol_bytes,
                };
                b.add_link_capacity(BANDWIDTH, &unit, &f)?;
                b.set_predefined_objective(&PredefinedObjective::MinMaxLinkLoad(BANDWIDTH.into()), None)?;
            }
            RecipeKind::Simple => {
                b.add_binary_variables(&[BinaryKind::Path, BinaryKind::Node])?;
                b.add_allocate_flow()?;
                b.add_route_all(&all)?;
                b.add_path_disable(&all)?;
                let bw = link_caps_from_topology(&topo, BANDWIDTH);
                b.add_link_capacity(BANDWIDTH, &bw, &|_, tc, _, _| tc.vol_bytes)?;
                // CPU is normalized by the node's own capacity; a middlebox
                // without one is unconstrained.
                let cpu_caps: BTreeMap<NodeId, f64> = node_caps_from_topology(&topo, CPU)
                    .into_iter()
                    .filter_map(|(v, c)| c.value().map(|c| (v, c)))
                    .collect();
                let boxes: BTreeMap<NodeId, Capacity> = topo
                    .nodes()
                    .iter()
                    .filter(|n| SIMPLE_CHAIN.iter().any(|s| n.has_service(s)))
                    .map(|n| (n.id, Capacity::Value(1.0)))
                    .collect();
                let cpu = |v: NodeId, tc: &TrafficClass, p: &AnnotatedPath, _: &str| {
                    match cpu_caps.get(&v) {
                        Some(&cap) if p.mbox.contains(&v) => tc.vol_flows * tc.cpu_cost / cap,
                        _ => 0.0,
                    }
                };
                b.add_node_capacity(CPU, &boxes, &cpu)?;
                let tcam: BTreeMap<NodeId, f64> = node_caps_from_topology(&topo, TCAM)
                    .into_iter()
                    .filter_map(|(v, c)| c.value().filter(|x| x.is_finite()).map(|x| (v, x)))
                    .collect();
                b.add_node_capacity_per_path(TCAM, &tcam, &|_, _, _, _| 1.0)?;
                b.set_predefined_objective(&PredefinedObjective::MinMaxNodeLoad(CPU.into()), None)?;
            }
            RecipeKind::ElasticTree { switch_power, link_power } => {
                b.add_binary_variables(&[BinaryKind::Path, BinaryKind::Node, BinaryKind::Edge])?;
                b.add_allocate_flow()?;
                b.add_route_all(&demanding(&tm.classes))?;
                let bw = link_caps_from_topology(&topo, BANDWIDTH);
                b.add_link_capacity(BANDWIDTH, &bw, &|_, tc, _, _| tc.vol_bytes)?;
                b.add_require_all_nodes(&all)?;
                b.add_require_all_edges(&all)?;
                b.add_path_disable(&all)?;
                let nodes: Vec<(String, f64)> = topo
                    .nodes()
                    .iter()
                    .map(|n| (bn_name(n.id), switch_power.get(&n.id).copied().unwrap_or(1.0)))
                    .collect();
                let links: Vec<(String, f64)> =
                    topo.links().iter().map(|l| (be_name(l.id()), link_power.get(&l.id()).copied().unwrap_or(1.0))).collect();
                b.define_var("SwitchPower", &as_refs(&nodes), 0.0, f64::INFINITY)?;
                b.define_var("LinkPower", &as_refs(&links), 0.0, f64::INFINITY)?;
                b.set_objective(&[("SwitchPower", SWITCH_POWER_WEIGHT), ("LinkPower", LINK_POWER_WEIGHT)], Sense::Minimize)?;
            }
            RecipeKind::ElasticScaling { budget_fraction } => {
                b.add_binary_variables(&[BinaryKind::Path, BinaryKind::Node])?;
                b.add_allocate_flow()?;
                b.add_route_all(&all)?;
                let tba: BTreeMap<NodeId, Capacity> = topo.nodes().iter().map(|n| (n.id, Capacity::ToBeAllocated)).collect();
                // Processing happens where the path places its middlebox.
                let cpu = |v: NodeId, tc: &TrafficClass, p: &AnnotatedPath, _: &str| {
                    if p.mbox.contains(&v) {
                        tc.vol_flows * tc.cpu_cost
                    } else {
                        0.0
                    }
                };
                b.add_node_capacity(CPU, &tba, &cpu)?;
                b.add_require_some_nodes(&all)?;
                b.add_path_disable(&all)?;
                b.add_budget(&|_| 1.0, budget_fraction * topo.num_nodes() as f64)?;
                b.set_predefined_objective(&PredefinedObjective::MinMaxNodeLoad(CPU.into()), None)?;
            }
        }
        Ok(())
    }
}

/// Power-minimization over every route at once, as a link-flow program:
/// one unit commodity per class with `f(c,l) ≤ be(l)`, `be(a,b) ≤ bn(a)`,
/// `be(a,b) ≤ bn(b)`, finite bandwidth caps, and the same objective as the
/// ElasticTree recipe. Any path-restricted optimum is at least this value.
pub fn elastictree_baseline(
    topo: &Topology,
    tm: &TrafficMatrix,
    switch_power: &BTreeMap<NodeId, f64>,
    link_power: &BTreeMap<LinkId, f64>,
) -> Result<ProgramModel, OptError> {
    let mut m = ProgramModel::new();
    let mut bn = BTreeMap::new();
    let mut obj = Vec::new();
    for n in topo.nodes() {
        let v = m.add_var(&bn_name(n.id), 0.0, 1.0, VarKind::Binary)?;
        obj.push((v, SWITCH_POWER_WEIGHT * switch_power.get(&n.id).copied().unwrap_or(1.0)));
        bn.insert(n.id, v);
    }
    let mut be = BTreeMap::new();
    for l in topo.links() {
        let id = l.id();
        let v = m.add_var(&be_name(id), 0.0, 1.0, VarKind::Binary)?;
        obj.push((v, LINK_POWER_WEIGHT * link_power.get(&id).copied().unwrap_or(1.0)));
        m.add_constraint(&format!("on_src_{}_{}", id.0, id.1), [(v, 1.0), (bn[&id.0], -1.0)], Relation::Le, 0.0)?;
        m.add_constraint(&format!("on_dst_{}_{}", id.0, id.1), [(v, 1.0), (bn[&id.1], -1.0)], Relation::Le, 0.0)?;
        be.insert(id, v);
    }

    let mut link_terms: BTreeMap<LinkId, Vec<(usize, f64)>> = BTreeMap::new();
    for c in tm.classes.iter().filter(|c| c.vol_bytes > 0.0) {
        let mut flow = BTreeMap::new();
        for l in topo.links() {
            let id = l.id();
            let f = m.add_var(&format!("f_c{}_{}_{}", c.id, id.0, id.1), 0.0, 1.0, VarKind::Continuous)?;
            m.add_constraint(&format!("use_c{}_{}_{}", c.id, id.0, id.1), [(f, 1.0), (be[&id], -1.0)], Relation::Le, 0.0)?;
            link_terms.entry(id).or_default().push((f, c.vol_bytes));
            flow.insert(id, f);
        }
        for n in topo.nodes() {
            let mut row = Vec::new();
            for &w in topo.successors(n.id) {
                row.push((flow[&(n.id, w)], 1.0));
                row.push((flow[&(w, n.id)], -1.0));
            }
            let rhs = if n.id == c.ingress {
                1.0
            } else if n.id == c.egress {
                -1.0
            } else {
                0.0
            };
            m.add_constraint(&format!("cons_c{}_{}", c.id, n.id), row, Relation::Eq, rhs)?;
        }
    }
    for (l, cap) in link_caps_from_topology(topo, BANDWIDTH) {
        if let Some(terms) = link_terms.remove(&l) {
            m.add_constraint(&format!("cap_{}_{}", l.0, l.1), terms, Relation::Le, cap)?;
        }
    }
    m.set_objective(Sense::Minimize, obj)?;
    Ok(m)
}
