use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnnotatedPath, PathSet};
use crate::topology::{LinkId, NodeId};

/// A node or directed link a path can depend on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    Node(NodeId),
    Link(LinkId),
}

/// A failure event. A failed link takes both directions down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    Node(NodeId),
    Link(NodeId, NodeId),
}

impl Failure {
    pub fn hits(&self, path: &AnnotatedPath) -> bool {
        match *self {
            Failure::Node(v) => path.contains_node(v),
            Failure::Link(a, b) => path.contains_link((a, b)) || path.contains_link((b, a)),
        }
    }

    fn elements(&self) -> Vec<Element> {
        match *self {
            Failure::Node(v) => vec![Element::Node(v)],
            Failure::Link(a, b) => vec![Element::Link((a, b)), Element::Link((b, a))],
        }
    }
}

/// Element → `(class, path index)` pairs of the paths traversing it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DependencyIndex {
    map: BTreeMap<Element, BTreeSet<(u32, usize)>>,
}

impl DependencyIndex {
    pub fn build(selected: &PathSet) -> Self {
        let mut map: BTreeMap<Element, BTreeSet<(u32, usize)>> = BTreeMap::new();
        for (c, paths) in selected.iter() {
            for (i, p) in paths.iter().enumerate() {
                for &v in &p.nodes {
                    map.entry(Element::Node(v)).or_default().insert((c, i));
                }
                for l in p.links() {
                    map.entry(Element::Link(l)).or_default().insert((c, i));
                }
            }
        }
        DependencyIndex { map }
    }

    pub fn paths_through(&self, e: Element) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.map.get(&e).into_iter().flatten().copied()
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        self.map.keys().copied()
    }

    /// Paths traversing any failed element.
    pub fn impacted(&self, failures: &[Failure]) -> BTreeSet<(u32, usize)> {
        failures.iter().flat_map(Failure::elements).flat_map(|e| self.paths_through(e)).collect()
    }
}
