//! Reader for the GraphML subset used by TopologyZoo: `<node>` and `<edge>`
//! elements, a `label` node key and a numeric link capacity key.

use std::collections::{BTreeMap, HashMap};

use super::{Link, Node, NodeId, Topology, TopologyError};

#[derive(Clone, Debug)]
pub struct GraphMlOptions {
    /// `attr.name` of the edge key holding link capacity.
    pub capacity_key: String,
    /// Resource the capacity is stored under.
    pub resource: String,
    /// Capacity for edges without the key; `None` leaves them unconstrained.
    pub default_capacity: Option<f64>,
}

impl Default for GraphMlOptions {
    fn default() -> Self {
        GraphMlOptions { capacity_key: "capacity".into(), resource: "bandwidth".into(), default_capacity: None }
    }
}

fn err(msg: impl Into<String>) -> TopologyError {
    TopologyError::Parse(msg.into())
}

/// Parses a GraphML document. Node ids are kept when they are all
/// integers, otherwise nodes are numbered in document order. Parallel
/// edges are merged with summed capacity and self-loops dropped, both of
/// which occur in TopologyZoo files.
pub fn parse_graphml(text: &str, opts: &GraphMlOptions) -> Result<Topology, TopologyError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| err(format!("GraphML: {e}")))?;
    let root = doc.root_element();
    let mut key_names: HashMap<&str, &str> = HashMap::new();
    for k in root.children().filter(|n| n.has_tag_name("key")) {
        if let (Some(id), Some(name)) = (k.attribute("id"), k.attribute("attr.name")) {
            key_names.insert(id, name);
        }
    }
    let graph = root.children().find(|n| n.has_tag_name("graph")).ok_or_else(|| err("GraphML: no <graph> element"))?;
    let directed = graph.attribute("edgedefault") == Some("directed");

    let data = |el: roxmltree::Node, want: &str| -> Option<String> {
        el.children()
            .filter(|c| c.has_tag_name("data"))
            .find(|c| c.attribute("key").and_then(|k| key_names.get(k)).is_some_and(|n| *n == want))
            .map(|c| c.text().unwrap_or("").trim().to_string())
    };

    let raw_nodes: Vec<roxmltree::Node> = graph.children().filter(|n| n.has_tag_name("node")).collect();
    let raw_ids: Vec<&str> = raw_nodes
        .iter()
        .map(|n| n.attribute("id").ok_or_else(|| err("GraphML: node without id")))
        .collect::<Result<_, _>>()?;
    let numeric: Option<Vec<NodeId>> = raw_ids.iter().map(|s| s.parse().ok()).collect();
    let ids: Vec<NodeId> = numeric.unwrap_or_else(|| (0..raw_ids.len() as NodeId).collect());
    let by_raw: HashMap<&str, NodeId> = raw_ids.iter().copied().zip(ids.iter().copied()).collect();

    let nodes: Vec<Node> = raw_nodes
        .iter()
        .zip(&ids)
        .zip(&raw_ids)
        .map(|((n, &id), raw)| Node::new(id, data(*n, "label").unwrap_or_else(|| raw.to_string())))
        .collect();

    let mut merged: BTreeMap<(NodeId, NodeId), Option<f64>> = BTreeMap::new();
    let mut order = Vec::new();
    for e in graph.children().filter(|n| n.has_tag_name("edge")) {
        let end = |attr: &str| -> Result<NodeId, TopologyError> {
            let raw = e.attribute(attr).ok_or_else(|| err(format!("GraphML: edge without {attr}")))?;
            by_raw.get(raw).copied().ok_or_else(|| err(format!("GraphML: edge references unknown node {raw:?}")))
        };
        let (s, t) = (end("source")?, end("target")?);
        if s == t {
            continue;
        }
        let cap = match data(e, &opts.capacity_key) {
            Some(v) => Some(v.parse::<f64>().map_err(|_| err(format!("GraphML: bad capacity {v:?}")))?),
            None => opts.default_capacity,
        };
        let key = if directed || s < t { (s, t) } else { (t, s) };
        match merged.get_mut(&key) {
            Some(slot) => {
                *slot = match (*slot, cap) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                }
            }
            None => {
                merged.insert(key, cap);
                order.push(key);
            }
        }
    }
    let edges: Vec<Link> = order
        .into_iter()
        .map(|(s, t)| {
            let mut l = Link::new(s, t);
            if let Some(c) = merged[&(s, t)] {
                l = l.with_capacity(&opts.resource, c);
            }
            l
        })
        .collect();
    if directed {
        Topology::new(nodes, edges)
    } else {
        Topology::from_undirected(nodes, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"<?xml version="1.0" encoding="utf-8"?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns">
  <key attr.name="label" attr.type="string" for="node" id="d0"/>
  <key attr.name="capacity" attr.type="double" for="edge" id="d1"/>
  <graph edgedefault="undirected">
    <node id="n0"><data key="d0">Seattle</data></node>
    <node id="n1"><data key="d0">Denver</data></node>
    <node id="n2"/>
    <edge source="n0" target="n1"><data key="d1">10</data></edge>
    <edge source="n1" target="n0"><data key="d1">5</data></edge>
    <edge source="n1" target="n2"/>
    <edge source="n2" target="n2"/>
  </graph>
</graphml>"#;

    #[test]
    fn reads_labels_merges_parallel_edges_and_drops_loops() {
        let t = parse_graphml(DOC, &GraphMlOptions::default()).unwrap();
        assert_eq!(t.num_nodes(), 3);
        assert_eq!(t.node(0).unwrap().name, "Seattle");
        assert_eq!(t.node(2).unwrap().name, "n2");
        assert_eq!(t.links().len(), 4);
        assert_eq!(t.link_capacity(1, 0, "bandwidth"), 15.0);
        assert_eq!(t.link_capacity(2, 1, "bandwidth"), f64::INFINITY);
    }

    #[test]
    fn default_capacity_fills_missing_keys() {
        let opts = GraphMlOptions { default_capacity: Some(7.0), ..GraphMlOptions::default() };
        let t = parse_graphml(DOC, &opts).unwrap();
        assert_eq!(t.link_capacity(1, 2, "bandwidth"), 7.0);
    }

    #[test]
    fn unknown_edge_endpoint_is_an_error() {
        let doc = DOC.replace(r#"target="n2"/>"#, r#"target="zz"/>"#);
        assert!(parse_graphml(&doc, &GraphMlOptions::default()).is_err());
    }
}
