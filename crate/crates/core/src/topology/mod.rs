//! Directed network model with per-resource capacities.
//!
//! Files list undirected edges by default; each edge becomes two directed
//! links. A capacity missing from a node or link means "unconstrained".

mod graphml;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graphml::{parse_graphml, GraphMlOptions};

pub type NodeId = u32;
pub type LinkId = (NodeId, NodeId);

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed topology document: {0}")]
    Parse(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("link {0}->{1} references unknown node {2}")]
    DanglingEndpoint(NodeId, NodeId, NodeId),
    #[error("duplicate link {0}->{1}")]
    DuplicateLink(NodeId, NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("negative or non-finite capacity {value} for resource {resource:?} on {element}")]
    BadCapacity { element: String, resource: String, value: f64 },
    #[error("fat-tree arity must be even and at least 2, got {0}")]
    FatTreeArity(i64),
}

/// A node resource capacity: a concrete amount or left for the optimizer to allocate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Capacity {
    Value(f64),
    ToBeAllocated,
}

impl Capacity {
    pub fn value(self) -> Option<f64> {
        match self {
            Capacity::Value(v) => Some(v),
            Capacity::ToBeAllocated => None,
        }
    }
}

impl Serialize for Capacity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Capacity::Value(v) => s.serialize_f64(*v),
            Capacity::ToBeAllocated => s.serialize_str("TBA"),
        }
    }
}

impl<'de> Deserialize<'de> for Capacity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Capacity::Value(v)),
            Raw::Text(t) if t == "TBA" => Ok(Capacity::ToBeAllocated),
            Raw::Text(t) => Err(de::Error::custom(format!("capacity must be a number or \"TBA\", got {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    #[serde(default)]
    pub name: String,
    #[serde(default, rename = "services")]
    pub service_types: BTreeSet<String>,
    #[serde(default, rename = "resources")]
    pub resource_caps: BTreeMap<String, Capacity>,
}

impl Node {
    pub fn new(id: NodeId, name: impl Into<String>) -> Self {
        Node { id, name: name.into(), service_types: BTreeSet::new(), resource_caps: BTreeMap::new() }
    }

    pub fn with_services<I, S>(mut self, services: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.service_types.extend(services.into_iter().map(Into::into));
        self
    }

    pub fn with_capacity(mut self, resource: &str, cap: Capacity) -> Self {
        self.resource_caps.insert(resource.to_string(), cap);
        self
    }

    pub fn has_service(&self, service: &str) -> bool {
        self.service_types.contains(service)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    #[serde(default, rename = "resources")]
    pub resource_caps: BTreeMap<String, f64>,
}

impl Link {
    pub fn new(src: NodeId, dst: NodeId) -> Self {
        Link { src, dst, resource_caps: BTreeMap::new() }
    }

    pub fn with_capacity(mut self, resource: &str, cap: f64) -> Self {
        self.resource_caps.insert(resource.to_string(), cap);
        self
    }

    pub fn id(&self) -> LinkId {
        (self.src, self.dst)
    }
}

#[derive(Serialize, Deserialize)]
struct Document {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    directed: bool,
    nodes: Vec<Node>,
    #[serde(default)]
    links: Vec<Link>,
}

/// Immutable after construction; lookups by node id and link id are O(1).
#[derive(Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    node_pos: HashMap<NodeId, usize>,
    link_pos: HashMap<LinkId, usize>,
    /// Successors per node position, ascending by id.
    out: Vec<Vec<NodeId>>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.links == other.links
    }
}

impl fmt::Debug for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Topology").field("nodes", &self.nodes.len()).field("links", &self.links.len()).finish()
    }
}

fn check_cap(element: impl Fn() -> String, resource: &str, v: f64) -> Result<(), TopologyError> {
    // +inf is allowed in code and means unconstrained.
    if v.is_nan() || v < 0.0 {
        return Err(TopologyError::BadCapacity { element: element(), resource: resource.to_string(), value: v });
    }
    Ok(())
}

impl Topology {
    /// Builds a topology from directed links.
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self, TopologyError> {
        let mut node_pos = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_pos.insert(n.id, i).is_some() {
                return Err(TopologyError::DuplicateNode(n.id));
            }
            for (r, c) in &n.resource_caps {
                if let Capacity::Value(v) = c {
                    check_cap(|| format!("node {}", n.id), r, *v)?;
                }
            }
        }
        let mut link_pos = HashMap::with_capacity(links.len());
        let mut out = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            if l.src == l.dst {
                return Err(TopologyError::SelfLoop(l.src));
            }
            for end in [l.src, l.dst] {
                if !node_pos.contains_key(&end) {
                    return Err(TopologyError::DanglingEndpoint(l.src, l.dst, end));
                }
            }
            if link_pos.insert(l.id(), i).is_some() {
                return Err(TopologyError::DuplicateLink(l.src, l.dst));
            }
            for (r, v) in &l.resource_caps {
                check_cap(|| format!("link {}->{}", l.src, l.dst), r, *v)?;
            }
            out[node_pos[&l.src]].push(l.dst);
        }
        for succ in &mut out {
            succ.sort_unstable();
        }
        Ok(Topology { nodes, links, node_pos, link_pos, out })
    }

    /// Builds a topology where every edge stands for a link in each direction.
    pub fn from_undirected(nodes: Vec<Node>, edges: Vec<Link>) -> Result<Self, TopologyError> {
        let mut links = Vec::with_capacity(2 * edges.len());
        for e in edges {
            let back = Link { src: e.dst, dst: e.src, resource_caps: e.resource_caps.clone() };
            links.push(e);
            links.push(back);
        }
        Topology::new(nodes, links)
    }

    pub fn from_json_str(text: &str) -> Result<Self, TopologyError> {
        let doc: Document = serde_json::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?;
        if doc.directed {
            Topology::new(doc.nodes, doc.links)
        } else {
            Topology::from_undirected(doc.nodes, doc.links)
        }
    }

    /// Reads a JSON topology, or GraphML when the extension is `.graphml`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| TopologyError::Io { path: path.display().to_string(), source })?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("graphml")) {
            parse_graphml(&text, &GraphMlOptions::default())
        } else {
            Topology::from_json_str(&text)
        }
    }

    /// Canonical JSON: directed, every link listed, unconstrained capacities omitted.
    pub fn to_json(&self) -> String {
        let strip = |m: &BTreeMap<String, f64>| m.iter().filter(|(_, v)| v.is_finite()).map(|(k, v)| (k.clone(), *v)).collect();
        let doc = Document {
            directed: true,
            nodes: self
                .nodes
                .iter()
                .map(|n| Node {
                    resource_caps: n
                        .resource_caps
                        .iter()
                        .filter(|(_, c)| !matches!(c, Capacity::Value(v) if v.is_infinite()))
                        .map(|(k, c)| (k.clone(), *c))
                        .collect(),
                    ..n.clone()
                })
                .collect(),
            links: self.links.iter().map(|l| Link { resource_caps: strip(&l.resource_caps), ..l.clone() }).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("topology serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.node_pos.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.node_pos.contains_key(&id)
    }

    pub fn link(&self, src: NodeId, dst: NodeId) -> Option<&Link> {
        self.link_pos.get(&(src, dst)).map(|&i| &self.links[i])
    }

    /// Successors of `id` in ascending id order.
    pub fn successors(&self, id: NodeId) -> &[NodeId] {
        self.node_pos.get(&id).map_or(&[], |&i| &self.out[i])
    }

    pub fn has_service(&self, id: NodeId, service: &str) -> bool {
        self.node(id).is_some_and(|n| n.has_service(service))
    }

    /// Capacity of `resource` on a link; +inf when absent.
    pub fn link_capacity(&self, src: NodeId, dst: NodeId, resource: &str) -> f64 {
        self.link(src, dst).and_then(|l| l.resource_caps.get(resource).copied()).unwrap_or(f64::INFINITY)
    }

    pub fn node_capacity(&self, id: NodeId, resource: &str) -> Option<Capacity> {
        self.node(id).and_then(|n| n.resource_caps.get(resource).copied())
    }

    /// Copy with `resource` set to `cap` on every link.
    pub fn with_uniform_link_capacity(&self, resource: &str, cap: f64) -> Self {
        let links = self.links.iter().cloned().map(|l| l.with_capacity(resource, cap)).collect();
        Topology::new(self.nodes.clone(), links).expect("capacity change keeps topology valid")
    }

    /// Copy with `resource` set to `cap` on every node.
    pub fn with_uniform_node_capacity(&self, resource: &str, cap: Capacity) -> Self {
        let nodes = self.nodes.iter().cloned().map(|n| n.with_capacity(resource, cap)).collect();
        Topology::new(nodes, self.links.clone()).expect("capacity change keeps topology valid")
    }
}

/// Three-tier fat-tree of `k`-port switches without hosts: `(k/2)²` core
/// switches, then per pod `k/2` aggregation and `k/2` edge switches.
///
/// Core switch `c` attaches to aggregation switch `c / (k/2)` of every pod.
pub fn fat_tree(k: i64) -> Result<Topology, TopologyError> {
    if k < 2 || k % 2 != 0 {
        return Err(TopologyError::FatTreeArity(k));
    }
    let half = (k / 2) as u32;
    let pods = k as u32;
    let n_core = half * half;
    let mut nodes = Vec::new();
    for c in 0..n_core {
        nodes.push(Node::new(c, format!("core{c}")).with_services(["switch", "core"]));
    }
    let agg_id = |pod: u32, i: u32| n_core + pod * 2 * half + i;
    let edge_id = |pod: u32, i: u32| n_core + pod * 2 * half + half + i;
    for pod in 0..pods {
        for i in 0..half {
            nodes.push(Node::new(agg_id(pod, i), format!("agg{pod}_{i}")).with_services(["switch", "aggregation"]));
        }
        for i in 0..half {
            nodes.push(Node::new(edge_id(pod, i), format!("edge{pod}_{i}")).with_services(["switch", "edge"]));
        }
    }
    let mut edges = Vec::new();
    for c in 0..n_core {
        for pod in 0..pods {
            edges.push(Link::new(c, agg_id(pod, c / half)));
        }
    }
    for pod in 0..pods {
        for a in 0..half {
            for e in 0..half {
                edges.push(Link::new(agg_id(pod, a), edge_id(pod, e)));
            }
        }
    }
    Topology::from_undirected(nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str = r#"{"nodes":[{"id":0,"name":"A"},{"id":1,"name":"B"},{"id":2,"name":"C"}],
        "links":[{"src":0,"dst":1},{"src":1,"dst":2},{"src":0,"dst":2,"resources":{"bandwidth":5}}]}"#;

    #[test]
    fn undirected_edges_expand_to_both_directions() {
        let t = Topology::from_json_str(TRIANGLE).unwrap();
        assert_eq!(t.num_nodes(), 3);
        assert_eq!(t.links().len(), 6);
        assert_eq!(t.link_capacity(2, 0, "bandwidth"), 5.0);
        assert_eq!(t.link_capacity(0, 1, "bandwidth"), f64::INFINITY);
        assert_eq!(t.successors(0), &[1, 2]);
    }

    #[test]
    fn dangling_endpoint_is_rejected() {
        let doc = r#"{"nodes":[{"id":0},{"id":1}],"links":[{"src":0,"dst":25}]}"#;
        assert!(matches!(Topology::from_json_str(doc), Err(TopologyError::DanglingEndpoint(0, 25, 25))));
    }

    #[test]
    fn negative_capacity_is_rejected() {
        let doc = r#"{"nodes":[{"id":0,"resources":{"cpu":-1}}],"links":[]}"#;
        assert!(matches!(Topology::from_json_str(doc), Err(TopologyError::BadCapacity { .. })));
    }

    #[test]
    fn tba_capacity_parses() {
        let doc = r#"{"nodes":[{"id":0,"resources":{"cpu":"TBA","mem":4}}],"links":[]}"#;
        let t = Topology::from_json_str(doc).unwrap();
        assert_eq!(t.node_capacity(0, "cpu"), Some(Capacity::ToBeAllocated));
        assert_eq!(t.node_capacity(0, "mem"), Some(Capacity::Value(4.0)));
        let bad = r#"{"nodes":[{"id":0,"resources":{"cpu":"lots"}}],"links":[]}"#;
        assert!(Topology::from_json_str(bad).is_err());
    }

    #[test]
    fn fat_tree_switch_counts() {
        assert_eq!(fat_tree(2).unwrap().num_nodes(), 5);
        let t = fat_tree(4).unwrap();
        assert_eq!(t.num_nodes(), 20);
        let count = |s: &str| t.nodes().iter().filter(|n| n.has_service(s)).count();
        assert_eq!((count("core"), count("aggregation"), count("edge")), (4, 8, 8));
        assert!(matches!(fat_tree(3), Err(TopologyError::FatTreeArity(3))));
        assert!(fat_tree(0).is_err());
    }
}
