//! Traffic classes and synthetic traffic matrices.

use std::collections::HashSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{NodeId, Topology};

/// Flows per byte used when a generator derives `vol_flows` from `vol_bytes`.
pub const DEFAULT_FLOWS_PER_BYTE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed traffic document: {0}")]
    Parse(String),
    #[error("class {0}: ingress equals egress")]
    SameEndpoints(u32),
    #[error("class {0}: negative or non-finite volume or cost")]
    BadVolume(u32),
    #[error("duplicate class id {0}")]
    DuplicateClass(u32),
    #[error("class {class}: node {node} is not in the topology")]
    UnknownNode { class: u32, node: NodeId },
    #[error("gravity model needs at least 2 nodes, topology has {0}")]
    TooFewNodes(usize),
    #[error("invalid generator parameter: {0}")]
    BadParameter(String),
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficClass {
    pub id: u32,
    pub ingress: NodeId,
    pub egress: NodeId,
    /// Flows per second.
    #[serde(default)]
    pub vol_flows: f64,
    /// Bytes per second.
    #[serde(default)]
    pub vol_bytes: f64,
    /// CPU units consumed per flow.
    #[serde(default = "one")]
    pub cpu_cost: f64,
    /// Service types the class must traverse, in order.
    #[serde(default)]
    pub chain: Vec<String>,
    #[serde(default = "one")]
    pub priority: f64,
}

impl TrafficClass {
    pub fn new(id: u32, ingress: NodeId, egress: NodeId, vol_bytes: f64) -> Self {
        TrafficClass {
            id,
            ingress,
            egress,
            vol_flows: vol_bytes * DEFAULT_FLOWS_PER_BYTE,
            vol_bytes,
            cpu_cost: 1.0,
            chain: Vec::new(),
            priority: 1.0,
        }
    }

    pub fn with_chain<I, S>(mut self, chain: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.chain = chain.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrafficMatrix {
    pub classes: Vec<TrafficClass>,
}

impl TrafficMatrix {
    /// Checks class invariants and, if given, that endpoints exist in `topo`.
    pub fn new(classes: Vec<TrafficClass>, topo: Option<&Topology>) -> Result<Self, TrafficError> {
        let tm = TrafficMatrix { classes };
        tm.validate(topo)?;
        Ok(tm)
    }

    pub fn validate(&self, topo: Option<&Topology>) -> Result<(), TrafficError> {
        let mut seen = HashSet::new();
        for c in &self.classes {
            if !seen.insert(c.id) {
                return Err(TrafficError::DuplicateClass(c.id));
            }
            if c.ingress == c.egress {
                return Err(TrafficError::SameEndpoints(c.id));
            }
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !(ok(c.vol_flows) && ok(c.vol_bytes) && ok(c.cpu_cost) && ok(c.priority)) {
                return Err(TrafficError::BadVolume(c.id));
            }
            if let Some(t) = topo {
                for node in [c.ingress, c.egress] {
                    if !t.contains(node) {
                        return Err(TrafficError::UnknownNode { class: c.id, node });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str, topo: Option<&Topology>) -> Result<Self, TrafficError> {
        let tm: TrafficMatrix = serde_json::from_str(text).map_err(|e| TrafficError::Parse(e.to_string()))?;
        tm.validate(topo)?;
        Ok(tm)
    }

    pub fn load(path: impl AsRef<Path>, topo: Option<&Topology>) -> Result<Self, TrafficError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| TrafficError::Io { path: path.display().to_string(), source })?;
        TrafficMatrix::from_json_str(&text, topo)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traffic serializes")
    }

    pub fn get(&self, id: u32) -> Option<&TrafficClass> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn total_bytes(&self) -> f64 {
        self.classes.iter().map(|c| c.vol_bytes).sum()
    }

    /// Copy with every volume multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let classes = self
            .classes
            .iter()
            .map(|c| TrafficClass { vol_bytes: c.vol_bytes * factor, vol_flows: c.vol_flows * factor, ..c.clone() })
            .collect();
        TrafficMatrix { classes }
    }
}

/// Parameters of the gravity model. Populations are `LogNormal(mu, sigma)`.
#[derive(Clone, Debug)]
pub struct GravityParams {
    pub mu: f64,
    pub sigma: f64,
    pub flows_per_byte: f64,
}

impl Default for GravityParams {
    fn default() -> Self {
        GravityParams { mu: 0.0, sigma: 1.0, flows_per_byte: DEFAULT_FLOWS_PER_BYTE }
    }
}

pub fn gravity_matrix(topo: &Topology, total_volume: f64, seed: u64) -> Result<TrafficMatrix, TrafficError> {
    gravity_matrix_with(topo, total_volume, seed, &GravityParams::default())
}

/// One class per ordered node pair, volume proportional to the product of
/// the endpoint populations and summing to `total_volume`. Class ids
/// follow the pair order `(i, j)` over the topology's node list.
pub fn gravity_matrix_with(
    topo: &Topology,
    total_volume: f64,
    seed: u64,
    params: &GravityParams,
) -> Result<TrafficMatrix, TrafficError> {
    let n = topo.num_nodes();
    if n < 2 {
        return Err(TrafficError::TooFewNodes(n));
    }
    if !(total_volume > 0.0 && total_volume.is_finite()) {
        return Err(TrafficError::BadParameter(format!("total volume {total_volume}")));
    }
    let dist = LogNormal::new(params.mu, params.sigma)
        .map_err(|e| TrafficError::BadParameter(format!("log-normal parameters: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pop: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let sum: f64 = pop.iter().sum();
    // Σ_{a≠b} pop_a·pop_b = (Σ pop)² − Σ pop²
    let denom = sum * sum - pop.iter().map(|p| p * p).sum::<f64>();
    let nodes = topo.nodes();
    let mut classes = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let bytes = total_volume * pop[i] * pop[j] / denom;
            let mut c = TrafficClass::new(classes.len() as u32, nodes[i].id, nodes[j].id, bytes);
            c.vol_flows = bytes * params.flows_per_byte;
            classes.push(c);
        }
    }
    Ok(TrafficMatrix { classes })
}

/// One class per ordered pair of edge switches (nodes with the "edge"
/// service), or of all nodes when none is marked, each with `per_pair_volume` bytes.
pub fn uniform_matrix(topo: &Topology, per_pair_volume: f64) -> TrafficMatrix {
    let edge: Vec<NodeId> = topo.nodes().iter().filter(|n| n.has_service("edge")).map(|n| n.id).collect();
    let ends = if edge.is_empty() { topo.nodes().iter().map(|n| n.id).collect() } else { edge };
    let mut classes = Vec::new();
    for &a in &ends {
        for &b in &ends {
            if a != b {
                classes.push(TrafficClass::new(classes.len() as u32, a, b, per_pair_volume));
            }
        }
    }
    TrafficMatrix { classes }
}
