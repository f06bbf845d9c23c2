use std::collections::HashMap;
use std::net::IpAddr;

use super::FlowRule;
use crate::topology::NodeId;

/// Per-node rule lists with longest-prefix lookup on the source, then the
/// destination.
#[derive(Clone, Debug, Default)]
pub struct RuleTable<'r> {
    by_node: HashMap<NodeId, Vec<&'r FlowRule>>,
}

impl<'r> RuleTable<'r> {
    pub fn new(rules: &'r [FlowRule]) -> Self {
        let mut by_node: HashMap<NodeId, Vec<&FlowRule>> = HashMap::new();
        for r in rules {
            by_node.entry(r.node).or_default().push(r);
        }
        RuleTable { by_node }
    }

    pub fn lookup(&self, node: NodeId, src: IpAddr, dst: IpAddr) -> Option<&'r FlowRule> {
        self.by_node
            .get(&node)?
            .iter()
            .filter(|r| r.matches.src.contains(&src) && r.matches.dst.contains(&dst))
            .max_by_key(|r| (r.matches.src.prefix_len(), r.matches.dst.prefix_len()))
            .copied()
    }
}

/// Forwards a packet hop by hop from `ingress` until no rule matches or
/// `max_hops` is reached; returns the visited nodes.
pub fn simulate(table: &RuleTable<'_>, ingress: NodeId, src: IpAddr, dst: IpAddr, max_hops: usize) -> Vec<NodeId> {
    let mut at = ingress;
    let mut trace = vec![at];
    while trace.len() <= max_hops {
        match table.lookup(at, src, dst) {
            Some(r) => {
                at = r.action.forward;
                trace.push(at);
            }
            None => break,
        }
    }
    trace
}
