//! Candidate paths per traffic class: enumeration of simple paths with
//! middlebox placement, validity predicates, selection and the reverse
//! index used to find paths hit by a failure.

mod index;
mod select;

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{LinkId, NodeId, Topology};
use crate::traffic::{TrafficClass, TrafficMatrix};

pub use index::{DependencyIndex, Element, Failure};
pub use select::{select_paths, SelectStrategy};

/// Service type accepted at a middlebox position the class chain leaves open.
pub const GENERIC_MBOX: &str = "mbox";

#[derive(Debug, Error)]
pub enum PathError {
    #[error("class {class}: node {node} is not in the topology")]
    UnknownEndpoint { class: u32, node: NodeId },
    #[error("class {0} has no candidate paths")]
    NoPaths(u32),
    #[error("invalid path parameter: {0}")]
    BadParameter(String),
    #[error("cannot access path file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed path file: {0}")]
    Parse(String),
}

/// A loop-free node sequence plus the nodes, in path order, that process
/// the class's middlebox chain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnnotatedPath {
    pub nodes: Vec<NodeId>,
    #[serde(default)]
    pub mbox: Vec<NodeId>,
}

impl AnnotatedPath {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        AnnotatedPath { nodes, mbox: Vec::new() }
    }

    pub fn with_mbox(nodes: Vec<NodeId>, mbox: Vec<NodeId>) -> Self {
        AnnotatedPath { nodes, mbox }
    }

    pub fn links(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn contains_node(&self, v: NodeId) -> bool {
        self.nodes.contains(&v)
    }

    pub fn contains_link(&self, l: LinkId) -> bool {
        self.links().any(|x| x == l)
    }

    pub fn ingress(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn egress(&self) -> NodeId {
        *self.nodes.last().expect("paths are non-empty")
    }

    /// Checks simplicity, that every hop is a link of `topo`, and that the
    /// middlebox nodes are an ordered sublist of the nodes.
    pub fn is_well_formed(&self, topo: &Topology) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut seen = std::collections::HashSet::new();
        if !self.nodes.iter().all(|n| seen.insert(*n)) {
            return false;
        }
        if !self.links().all(|(s, d)| topo.link(s, d).is_some()) || !self.nodes.iter().all(|n| topo.contains(*n)) {
            return false;
        }
        let pos: Vec<usize> = match self.mbox.iter().map(|m| self.nodes.iter().position(|n| n == m)).collect() {
            Some(p) => p,
            None => return false,
        };
        pos.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Candidate paths per class id, iterated in ascending class id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathSet {
    pub per_class: BTreeMap<u32, Vec<AnnotatedPath>>,
}

impl PathSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, class: u32) -> &[AnnotatedPath] {
        self.per_class.get(&class).map_or(&[], Vec::as_slice)
    }

    pub fn insert(&mut self, class: u32, paths: Vec<AnnotatedPath>) {
        self.per_class.insert(class, paths);
    }

    pub fn classes(&self) -> impl Iterator<Item = u32> + '_ {
        self.per_class.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[AnnotatedPath])> {
        self.per_class.iter().map(|(c, p)| (*c, p.as_slice()))
    }

    pub fn total_paths(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    /// Copy without the paths that traverse a failed element. Classes keep
    /// their entry, possibly empty.
    pub fn without(&self, failures: &[Failure]) -> PathSet {
        let per_class = self
            .per_class
            .iter()
            .map(|(c, ps)| (*c, ps.iter().filter(|p| !failures.iter().any(|f| f.hits(p))).cloned().collect()))
            .collect();
        PathSet { per_class }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("path set serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, PathError> {
        serde_json::from_str(text).map_err(|e| PathError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PathError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| PathError::Io { path: path.display().to_string(), source })?;
        PathSet::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PathError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| PathError::Io { path: path.display().to_string(), source })
    }
}

/// Validity test for a candidate path. Must be pure.
pub trait PathPredicate: Sync {
    fn accept(&self, path: &AnnotatedPath, topo: &Topology, tc: &TrafficClass) -> bool;
}

impl<F> PathPredicate for F
where
    F: Fn(&AnnotatedPath, &Topology, &TrafficClass) -> bool + Sync,
{
    fn accept(&self, path: &AnnotatedPath, topo: &Topology, tc: &TrafficClass) -> bool {
        self(path, topo, tc)
    }
}

/// Accepts every path.
pub fn null_predicate() -> impl PathPredicate + Clone {
    |_: &AnnotatedPath, _: &Topology, _: &TrafficClass| true
}

/// Accepts paths with at least one middlebox position assigned.
pub fn has_mbox_predicate() -> impl PathPredicate + Clone {
    |p: &AnnotatedPath, _: &Topology, _: &TrafficClass| !p.mbox.is_empty()
}

/// Accepts paths whose middlebox nodes can serve `order` in sequence:
/// distinct middlebox nodes, in path order, offering `order[0]`,
/// `order[1]`, ... Other middlebox nodes may sit in between.
pub fn waypoint_predicate<I, S>(order: I) -> impl PathPredicate + Clone
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let order: Vec<String> = order.into_iter().map(Into::into).collect();
    move |p: &AnnotatedPath, topo: &Topology, _: &TrafficClass| {
        // Earliest-match greedy is exact for subsequence containment.
        let mut want = order.iter().peekable();
        for m in &p.mbox {
            if let Some(s) = want.peek() {
                if topo.has_service(*m, s) {
                    want.next();
                }
            }
        }
        want.peek().is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    /// Maximum nodes per path, endpoints included.
    pub max_len: usize,
    /// Maximum accepted paths per class.
    pub max_count: usize,
    /// Number of middlebox positions placed on every path; 0 disables placement.
    pub chain_len: usize,
    /// Lets one node fill consecutive positions if it offers each service.
    pub colocate: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { max_len: 10, max_count: 1000, chain_len: 0, colocate: false }
    }
}

impl GenParams {
    fn check(&self) -> Result<(), PathError> {
        if self.max_len < 1 || self.max_count < 1 {
            return Err(PathError::BadParameter(format!(
                "max_len {} and max_count {} must be at least 1",
                self.max_len, self.max_count
            )));
        }
        Ok(())
    }
}

/// Hop distance from every node to `target`; `usize::MAX` if unreachable.
fn hops_to(topo: &Topology, target: NodeId) -> BTreeMap<NodeId, usize> {
    let mut pred: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for l in topo.links() {
        pred.entry(l.dst).or_default().push(l.src);
    }
    let mut dist = BTreeMap::from([(target, 0usize)]);
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        for &u in pred.get(&v).map_or(&[][..], Vec::as_slice) {
            dist.entry(u).or_insert_with(|| {
                queue.push_back(u);
                d + 1
            });
        }
    }
    dist
}

/// Service required at middlebox position `i` for class `tc`.
fn position_service(tc: &TrafficClass, i: usize) -> &str {
    tc.chain.get(i).map_or(GENERIC_MBOX, String::as_str)
}

/// Appends every middlebox placement of `nodes` to `out`, in
/// lexicographic order of node positions, stopping once `out` holds `cap`
/// accepted paths.
#[allow(clippy::too_many_arguments)]
fn expand(
    topo: &Topology,
    tc: &TrafficClass,
    nodes: &[NodeId],
    params: &GenParams,
    pred: &dyn PathPredicate,
    pick: &mut Vec<NodeId>,
    from: usize,
    out: &mut Vec<AnnotatedPath>,
) {
    if out.len() >= params.max_count {
        return;
    }
    if pick.len() == params.chain_len {
        let p = AnnotatedPath::with_mbox(nodes.to_vec(), pick.clone());
        if pred.accept(&p, topo, tc) {
            out.push(p);
        }
        return;
    }
    let need = position_service(tc, pick.len());
    for i in from..nodes.len() {
        if topo.has_service(nodes[i], need) {
            pick.push(nodes[i]);
            let next = if params.colocate { i } else { i + 1 };
            expand(topo, tc, nodes, params, pred, pick, next, out);
            pick.pop();
            if out.len() >= params.max_count {
                return;
            }
        }
    }
}

/// Depth-first enumeration of simple ingress→egress paths of at most
/// `max_len` nodes, visiting successors in ascending id order. Each raw
/// path yields one candidate per middlebox placement; the predicate
/// filters candidates and enumeration stops at `max_count` survivors.
pub fn enumerate_paths(
    topo: &Topology,
    tc: &TrafficClass,
    predicate: &dyn PathPredicate,
    params: &GenParams,
) -> Result<Vec<AnnotatedPath>, PathError> {
    params.check()?;
    for node in [tc.ingress, tc.egress] {
        if !topo.contains(node) {
            return Err(PathError::UnknownEndpoint { class: tc.id, node });
        }
    }
    let dist = hops_to(topo, tc.egress);
    let remaining = |v: NodeId| dist.get(&v).copied().unwrap_or(usize::MAX);
    let mut out = Vec::new();
    if remaining(tc.ingress) >= params.max_len {
        return Ok(out);
    }

    let mut on_path = std::collections::HashSet::from([tc.ingress]);
    let mut nodes = vec![tc.ingress];
    // Frame per depth: index of the next successor to try.
    let mut next = vec![0usize];
    let mut pick = Vec::with_capacity(params.chain_len);
    while let Some(&v) = nodes.last() {
        if out.len() >= params.max_count {
            break;
        }
        if v == tc.egress {
            expand(topo, tc, &nodes, params, predicate, &mut pick, 0, &mut out);
            on_path.remove(&v);
            nodes.pop();
            next.pop();
            continue;
        }
        let succ = topo.successors(v);
        let i = next.last_mut().expect("frame per node");
        let mut advanced = false;
        while *i < succ.len() {
            let w = succ[*i];
            *i += 1;
            // Prune when the egress cannot be reached within the length cap.
            if on_path.contains(&w) || nodes.len().saturating_add(remaining(w)) >= params.max_len {
                continue;
            }
            on_path.insert(w);
            nodes.push(w);
            next.push(0);
            advanced = true;
            break;
        }
        if !advanced {
            on_path.remove(&v);
            nodes.pop();
            next.pop();
        }
    }
    Ok(out)
}

/// Runs [`enumerate_paths`] for every class in parallel. The result is
/// keyed by class id and does not depend on scheduling.
pub fn generate_paths(
    topo: &Topology,
    tm: &TrafficMatrix,
    predicate: &dyn PathPredicate,
    params: &GenParams,
) -> Result<PathSet, PathError> {
    let per_class: Vec<(u32, Vec<AnnotatedPath>)> = tm
        .classes
        .par_iter()
        .map(|tc| enumerate_paths(topo, tc, predicate, params).map(|p| (tc.id, p)))
        .collect::<Result<_, _>>()?;
    Ok(PathSet { per_class: per_class.into_iter().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Link, Node};

    fn triangle() -> Topology {
        let nodes = (0..3).map(|i| Node::new(i, format!("n{i}"))).collect();
        Topology::from_undirected(nodes, vec![Link::new(0, 1), Link::new(1, 2), Link::new(0, 2)]).unwrap()
    }

    fn line_with_mboxes() -> Topology {
        let nodes = vec![
            Node::new(0, "s"),
            Node::new(1, "m1").with_services(["fw", "ids"]),
            Node::new(2, "m2").with_services(["fw", "ids"]),
            Node::new(3, "t"),
        ];
        Topology::from_undirected(nodes, vec![Link::new(0, 1), Link::new(1, 2), Link::new(2, 3)]).unwrap()
    }

    #[test]
    fn triangle_has_two_paths_in_dfs_order() {
        let tc = TrafficClass::new(0, 0, 1, 1.0);
        let paths = enumerate_paths(&triangle(), &tc, &null_predicate(), &GenParams { max_len: 3, ..Default::default() }).unwrap();
        let nodes: Vec<_> = paths.iter().map(|p| p.nodes.clone()).collect();
        assert_eq!(nodes, vec![vec![0, 1], vec![0, 2, 1]]);
    }

    #[test]
    fn length_cap_counts_nodes() {
        let tc = TrafficClass::new(0, 0, 1, 1.0);
        let paths = enumerate_paths(&triangle(), &tc, &null_predicate(), &GenParams { max_len: 2, ..Default::default() }).unwrap();
        assert_eq!(paths.len(), 1);
    }

    #[test]
    fn two_position_chain_on_two_capable_nodes_has_one_placement() {
        let tc = TrafficClass::new(0, 0, 3, 1.0).with_chain(["fw", "ids"]);
        let params = GenParams { chain_len: 2, ..Default::default() };
        let paths = enumerate_paths(&line_with_mboxes(), &tc, &null_predicate(), &params).unwrap();
        assert_eq!(paths, vec![AnnotatedPath::with_mbox(vec![0, 1, 2, 3], vec![1, 2])]);
        let coloc = GenParams { colocate: true, ..params };
        let paths = enumerate_paths(&line_with_mboxes(), &tc, &null_predicate(), &coloc).unwrap();
        let mb: Vec<_> = paths.iter().map(|p| p.mbox.clone()).collect();
        assert_eq!(mb, vec![vec![1, 1], vec![1, 2], vec![2, 2]]);
    }

    #[test]
    fn reject_all_gives_nothing() {
        let tc = TrafficClass::new(0, 0, 1, 1.0);
        let none = |_: &AnnotatedPath, _: &Topology, _: &TrafficClass| false;
        assert!(enumerate_paths(&triangle(), &tc, &none, &GenParams::default()).unwrap().is_empty());
    }

    #[test]
    fn unknown_endpoint_is_an_error() {
        let tc = TrafficClass::new(7, 0, 9, 1.0);
        let r = enumerate_paths(&triangle(), &tc, &null_predicate(), &GenParams::default());
        assert!(matches!(r, Err(PathError::UnknownEndpoint { class: 7, node: 9 })));
    }

    #[test]
    fn waypoint_order_is_a_subsequence_test() {
        let nodes = vec![
            Node::new(0, "fw").with_services(["fw"]),
            Node::new(1, "proxy").with_services(["proxy"]),
            Node::new(2, "ids").with_services(["ids"]),
        ];
        let topo = Topology::from_undirected(nodes, vec![Link::new(0, 1), Link::new(1, 2)]).unwrap();
        let tc = TrafficClass::new(0, 0, 2, 1.0);
        let pred = waypoint_predicate(["fw", "ids"]);
        let p = |mbox: Vec<NodeId>| AnnotatedPath::with_mbox(vec![0, 1, 2], mbox);
        assert!(pred.accept(&p(vec![0, 2]), &topo, &tc));
        assert!(pred.accept(&p(vec![0, 1, 2]), &topo, &tc));
        assert!(!pred.accept(&p(vec![2, 0]), &topo, &tc));
        assert!(!pred.accept(&p(vec![0]), &topo, &tc));
    }

    #[test]
    fn path_set_json_round_trip() {
        let mut ps = PathSet::new();
        ps.insert(3, vec![AnnotatedPath::with_mbox(vec![0, 1], vec![1])]);
        ps.insert(1, vec![AnnotatedPath::new(vec![2, 0])]);
        let text = ps.to_json();
        assert!(text.contains("\"mbox\""));
        assert_eq!(PathSet::from_json_str(&text).unwrap(), ps);
        assert_eq!(ps.classes().collect::<Vec<_>>(), vec![1, 3]);
    }
}
