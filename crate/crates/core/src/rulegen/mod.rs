//! Forwarding rules from path fractions. A class's source prefix is cut
//! into equal sub-prefixes, each pinned to one path, so the split is
//! realized by static matches and every flow keeps its path.

mod controller;
mod sim;

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr};

use ipnet::{IpNet, Ipv4Net};
use log::warn;
use pathopt_lp::Solution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optmodel::xp_name;
use crate::pathgen::PathSet;
use crate::topology::{NodeId, Topology};
use crate::traffic::TrafficMatrix;

pub use controller::{odl_flow_payload, ControllerRequest, MockController};
pub use sim::{simulate, RuleTable};

/// Default number of extra prefix bits available for splitting.
pub const DEFAULT_MAX_DEPTH: u8 = 8;

/// `x` values at or below this are treated as unused paths.
pub const FLOW_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("fractions must be finite and non-negative, got {0}")]
    BadFraction(f64),
    #[error("fractions sum to {0}, expected 1")]
    BadSum(f64),
    #[error("{count} paths cannot share a prefix split {depth} bits deep")]
    TooManyPaths { count: usize, depth: u8 },
    #[error("prefix {base} cannot be split {depth} more bits")]
    PrefixTooLong { base: IpNet, depth: u8 },
    #[error("split depth {0} exceeds 32 bits")]
    BadDepth(u8),
    #[error("no prefix mapping for class {0}")]
    MissingPrefix(u32),
    #[error("class {class} path {path}: no link {from}->{to}")]
    NotAdjacent { class: u32, path: usize, from: NodeId, to: NodeId },
    #[error("class {class} has no path {path}")]
    UnknownPath { class: u32, path: usize },
}

/// Sub-prefixes of a base prefix, each assigned to a path index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixAssignment {
    pub base: IpNet,
    /// Bits added to the base prefix length.
    pub depth: u8,
    /// Disjoint sub-prefixes in address order with their path.
    pub parts: Vec<(IpNet, usize)>,
    /// Realized share per path: assigned sub-prefixes over `2^depth`.
    pub achieved: BTreeMap<usize, f64>,
}

/// Largest-remainder apportionment of `slots` over `f`; ties go to the
/// lower index.
fn apportion(f: &[(usize, f64)], slots: u64) -> Vec<u64> {
    let s = slots as f64;
    let mut n: Vec<u64> = f.iter().map(|(_, x)| (x * s).floor() as u64).collect();
    let used: u64 = n.iter().sum();
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = f[a].1 * s - n[a] as f64;
        let rb = f[b].1 * s - n[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(slots.saturating_sub(used) as usize) {
        n[i] += 1;
    }
    n
}

/// Splits `base` into `2^d` equal sub-prefixes at the smallest `d` whose
/// apportionment is exact or misses every fraction by less than
/// `2^-max_depth`, then hands sub-prefixes out in address order, each to
/// the path furthest below its target among those with slots left.
///
/// Fractions under half a slot at full depth are dropped and the rest
/// renormalized.
pub fn split_prefixes(fractions: &BTreeMap<usize, f64>, base: IpNet, max_depth: u8) -> Result<PrefixAssignment, RuleError> {
    if max_depth > 32 {
        return Err(RuleError::BadDepth(max_depth));
    }
    let base = base.trunc();
    let mut sum = 0.0;
    for &v in fractions.values() {
        if !v.is_finite() || v < 0.0 {
            return Err(RuleError::BadFraction(v));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(RuleError::BadSum(sum));
    }
    let unit = (-(max_depth as f64)).exp2();
    let mut f: Vec<(usize, f64)> = fractions.iter().filter(|(_, v)| **v > 0.0).map(|(k, v)| (*k, *v)).collect();
    let sliver: Vec<usize> = f.iter().filter(|(_, v)| *v < unit / 2.0).map(|(k, _)| *k).collect();
    if !sliver.is_empty() {
        warn!("dropping paths {sliver:?}: share below half of a 1/2^{max_depth} split");
        f.retain(|(_, v)| *v >= unit / 2.0);
    }
    let kept: f64 = f.iter().map(|(_, v)| v).sum();
    for e in &mut f {
        e.1 /= kept;
    }
    if f.is_empty() || f.len() as u64 > 1u64 << max_depth {
        return Err(RuleError::TooManyPaths { count: f.len(), depth: max_depth });
    }

    let mut depth = 0u8;
    let counts = loop {
        let n = apportion(&f, 1 << depth);
        let slots = (1u64 << depth) as f64;
        let err = f.iter().zip(&n).map(|((_, x), c)| (*c as f64 / slots - x).abs()).fold(0.0, f64::max);
        if err == 0.0 || err < unit || depth == max_depth {
            break n;
        }
        depth += 1;
    };
    if base.prefix_len() as u32 + depth as u32 > base.max_prefix_len() as u32 {
        return Err(RuleError::PrefixTooLong { base, depth });
    }

    let slots = 1u64 << depth;
    let subnets: Vec<IpNet> = if depth == 0 {
        vec![base]
    } else {
        base.subnets(base.prefix_len() + depth).expect("length checked").collect()
    };
    let mut given = vec![0u64; f.len()];
    let mut parts = Vec::with_capacity(subnets.len());
    for net in subnets {
        let pick = (0..f.len())
            .filter(|&i| given[i] < counts[i])
            .max_by(|&a, &b| {
                let ra = f[a].1 - given[a] as f64 / slots as f64;
                let rb = f[b].1 - given[b] as f64 / slots as f64;
                ra.total_cmp(&rb).then(b.cmp(&a))
            })
            .expect("counts sum to the slot count");
        given[pick] += 1;
        parts.push((net, f[pick].0));
    }
    let achieved = f.iter().zip(&given).map(|((k, _), g)| (*k, *g as f64 / slots as f64)).collect();
    Ok(PrefixAssignment { base, depth, parts, achieved })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleMatch {
    pub src: IpNet,
    pub dst: IpNet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleAction {
    pub forward: NodeId,
}

/// Match on (source, destination) prefix at `node`, forward to a neighbor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowRule {
    pub node: NodeId,
    #[serde(rename = "match")]
    pub matches: RuleMatch,
    pub action: RuleAction,
    pub class: u32,
    pub path: usize,
}

/// Source and destination prefixes of each class.
pub type ClassPrefixes = BTreeMap<u32, (IpNet, IpNet)>;

/// Source `10.(c>>8).(c&255).0/24` per class id `c` and destination
/// `172.(16+(e>>8 & 15)).(e&255).0/24` per egress node `e`.
pub fn default_class_prefixes(tm: &TrafficMatrix) -> ClassPrefixes {
    tm.classes
        .iter()
        .map(|c| {
            let src = Ipv4Net::new(Ipv4Addr::new(10, (c.id >> 8) as u8, (c.id & 255) as u8, 0), 24).expect("valid length");
            let e = c.egress;
            let dst = Ipv4Net::new(Ipv4Addr::new(172, 16 + ((e >> 8) & 15) as u8, (e & 255) as u8, 0), 24)
                .expect("valid length");
            (c.id, (IpNet::V4(src), IpNet::V4(dst)))
        })
        .collect()
}

/// Rules plus the prefix split they implement, per class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<FlowRule>,
    pub assignments: BTreeMap<u32, PrefixAssignment>,
}

impl RuleSet {
    /// JSON array of rules.
    pub fn rules_json(&self) -> String {
        serde_json::to_string_pretty(&self.rules).expect("rules serialize")
    }

    pub fn rules_at(&self, node: NodeId) -> impl Iterator<Item = &FlowRule> {
        self.rules.iter().filter(move |r| r.node == node)
    }
}

/// For each class, splits its source prefix over the paths with positive
/// `x` in `sol` and emits one rule per sub-prefix at every node of the
/// path except the last. Classes with no flow get no rules.
pub fn generate_rules(
    topo: &Topology,
    tm: &TrafficMatrix,
    selected: &PathSet,
    sol: &Solution,
    prefixes: &ClassPrefixes,
    max_depth: u8,
) -> Result<RuleSet, RuleError> {
    let mut out = RuleSet::default();
    for tc in &tm.classes {
        let paths = selected.get(tc.id);
        let x: BTreeMap<usize, f64> = (0..paths.len())
            .filter_map(|i| sol.value(&xp_name(tc.id, i)).filter(|v| *v > FLOW_EPS).map(|v| (i, v)))
            .collect();
        if x.is_empty() {
            continue;
        }
        let &(src, dst) = prefixes.get(&tc.id).ok_or(RuleError::MissingPrefix(tc.id))?;
        let total: f64 = x.values().sum();
        let norm = x.into_iter().map(|(i, v)| (i, v / total)).collect();
        let split = split_prefixes(&norm, src, max_depth)?;
        for &(sub, pi) in &split.parts {
            let p = paths.get(pi).ok_or(RuleError::UnknownPath { class: tc.id, path: pi })?;
            for hop in p.nodes.windows(2) {
                if topo.link(hop[0], hop[1]).is_none() {
                    return Err(RuleError::NotAdjacent { class: tc.id, path: pi, from: hop[0], to: hop[1] });
                }
                out.rules.push(FlowRule {
                    node: hop[0],
                    matches: RuleMatch { src: sub, dst },
                    action: RuleAction { forward: hop[1] },
                    class: tc.id,
                    path: pi,
                });
            }
        }
        out.assignments.insert(tc.id, split);
    }
    Ok(out)
}

/// The `k`-th address of `net` counting from its network address, wrapping
/// inside the prefix.
pub fn nth_address(net: IpNet, k: u128) -> IpAddr {
    let host_bits = (net.max_prefix_len() - net.prefix_len()) as u32;
    let off = if host_bits >= 128 { k } else { k % (1u128 << host_bits) };
    match net {
        IpNet::V4(n) => IpAddr::V4(Ipv4Addr::from(u32::from(n.network()).wrapping_add(off as u32))),
        IpNet::V6(n) => IpAddr::V6(std::net::Ipv6Addr::from(u128::from(n.network()).wrapping_add(off))),
    }
}
