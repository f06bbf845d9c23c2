use std::collections::BTreeMap;

use pathopt_lp::{Relation, VarKind};

use super::{check_name, el_name, nc_name, nl_name, LoadVar, OptBuilder, OptError};
use crate::pathgen::AnnotatedPath;
use crate::topology::{Capacity, LinkId, NodeId, Topology};
use crate::traffic::TrafficClass;

/// Resource `r` consumed on link `l` if all of class `c` used path `p`.
pub type LinkCapFn<'f> = dyn Fn(LinkId, &TrafficClass, &AnnotatedPath, &str) -> f64 + 'f;

/// Resource `r` consumed at node `v` if all of class `c` used path `p`.
pub type NodeCapFn<'f> = dyn Fn(NodeId, &TrafficClass, &AnnotatedPath, &str) -> f64 + 'f;

/// Bandwidth of the class, unnormalized.
pub fn default_link_fn(_: LinkId, tc: &TrafficClass, _: &AnnotatedPath, _: &str) -> f64 {
    tc.vol_bytes
}

/// Finite capacities of `resource` on the topology's links.
pub fn link_caps_from_topology(topo: &Topology, resource: &str) -> BTreeMap<LinkId, f64> {
    topo.links()
        .iter()
        .filter_map(|l| l.resource_caps.get(resource).filter(|c| c.is_finite()).map(|c| (l.id(), *c)))
        .collect()
}

/// Capacities of `resource` on the nodes that list it.
pub fn node_caps_from_topology(topo: &Topology, resource: &str) -> BTreeMap<NodeId, Capacity> {
    topo.nodes().iter().filter_map(|n| n.resource_caps.get(resource).map(|c| (n.id, *c))).collect()
}

fn checked(what: impl Fn() -> String, v: f64) -> Result<f64, OptError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(OptError::BadCapacity(what(), v))
    }
}

impl OptBuilder<'_> {
    /// Coefficients of every `(class, path)` variable touching `elem`, from
    /// `var_of` (`x` or `bp`) and the cost function.
    fn path_terms<E: Copy>(
        &self,
        elem: E,
        on_path: impl Fn(&AnnotatedPath, E) -> bool,
        var_of: impl Fn(usize, usize) -> usize,
        cost: impl Fn(E, &TrafficClass, &AnnotatedPath) -> f64,
        what: impl Fn() -> String,
    ) -> Result<Vec<(usize, f64)>, OptError> {
        let mut terms = Vec::new();
        for (ci, c) in self.classes.iter().enumerate() {
            for (pi, p) in c.paths.iter().enumerate() {
                if on_path(p, elem) {
                    let k = checked(&what, cost(elem, &c.tc, p))?;
                    if k != 0.0 {
                        terms.push((var_of(ci, pi), k));
                    }
                }
            }
        }
        Ok(terms)
    }

    /// For each listed link: `el(l,r) = Σ x·fn` and `0 ≤ el(l,r) ≤ cap`.
    /// Unlisted links get no load variable.
    pub fn add_link_capacity(
        &mut self,
        resource: &str,
        caps: &BTreeMap<LinkId, f64>,
        f: &LinkCapFn<'_>,
    ) -> Result<(), OptError> {
        check_name(resource)?;
        for (&(s, d), &cap) in caps {
            if self.topo.link(s, d).is_none() {
                return Err(OptError::UnknownLink(s, d));
            }
            if cap.is_nan() || cap < 0.0 {
                return Err(OptError::BadCapacity(format!("link {s}->{d}"), cap));
            }
        }
        self.mark(format!("link_capacity_{resource}"))?;
        let mut loads = BTreeMap::new();
        for (&l, &cap) in caps {
            let terms = self.path_terms(
                l,
                |p, l| p.contains_link(l),
                |ci, pi| self.classes[ci].xp[pi],
                |l, tc, p| f(l, tc, p, resource),
                || format!("{resource} load of link {}->{}", l.0, l.1),
            )?;
            let el = self.model.add_var(&el_name(l, resource), 0.0, cap, VarKind::Continuous)?;
            let mut row = vec![(el, 1.0)];
            row.extend(terms.iter().map(|&(x, k)| (x, -k)));
            self.add_row(format!("eldef_{}_{}_{resource}", l.0, l.1), row, Relation::Eq, 0.0)?;
            loads.insert(l, LoadVar { var: el, terms, cap_var: None, cap });
        }
        self.link_loads.insert(resource.to_string(), loads);
        Ok(())
    }

    fn check_nodes<T>(&self, caps: &BTreeMap<NodeId, T>) -> Result<(), OptError> {
        match caps.keys().find(|v| !self.topo.contains(**v)) {
            Some(v) => Err(OptError::UnknownNode(*v)),
            None => Ok(()),
        }
    }

    fn claim_node_resource(&mut self, template: &str, resource: &str) -> Result<(), OptError> {
        check_name(resource)?;
        if self.node_loads.contains_key(resource) {
            return Err(OptError::DuplicateTemplate(format!("node load for {resource}")));
        }
        self.mark(format!("{template}_{resource}"))
    }

    /// Adds `nl`, `nc` and the rows `nl = Σ terms`, `nl ≤ nc` for node `v`.
    fn add_node_load(
        &mut self,
        v: NodeId,
        resource: &str,
        terms: Vec<(usize, f64)>,
        cap: Capacity,
    ) -> Result<LoadVar, OptError> {
        let nl = self.model.add_var(&nl_name(v, resource), 0.0, f64::INFINITY, VarKind::Continuous)?;
        let (lo, hi) = match cap {
            Capacity::Value(c) if c.is_finite() => (c, c),
            _ => (0.0, f64::INFINITY),
        };
        let nc = self.model.add_var(&nc_name(v, resource), lo, hi, VarKind::Continuous)?;
        let mut row = vec![(nl, 1.0)];
        row.extend(terms.iter().map(|&(x, k)| (x, -k)));
        self.add_row(format!("nldef_{v}_{resource}"), row, Relation::Eq, 0.0)?;
        self.add_row(format!("nlcap_{v}_{resource}"), vec![(nl, 1.0), (nc, -1.0)], Relation::Le, 0.0)?;
        Ok(LoadVar { var: nl, terms, cap_var: Some(nc), cap: hi })
    }

    /// `nc(v,r) ≤ U·bn(v)` for to-be-allocated capacities, so a disabled
    /// node gets none. `U` is the largest load the node can carry.
    fn add_tba_row(&mut self, resource: &str, v: NodeId, bound: f64) -> Result<(), OptError> {
        let nc = self.node_loads[resource][&v].cap_var.expect("node loads have nc");
        let row = vec![(nc, 1.0), (self.bn[&v], -bound)];
        self.add_row(format!("tba_{v}_{resource}"), row, Relation::Le, 0.0)?;
        Ok(())
    }

    pub(super) fn link_tba_nodes(&mut self) -> Result<(), OptError> {
        let pending: Vec<(String, NodeId, f64)> =
            self.tba.iter().flat_map(|(r, m)| m.iter().map(move |(v, u)| (r.clone(), *v, *u))).collect();
        for (r, v, u) in pending {
            self.add_tba_row(&r, v, u)?;
        }
        Ok(())
    }

    /// For each listed node: `nl(v,r) = Σ x·fn`, `nl ≤ nc(v,r)`, with `nc`
    /// fixed to a concrete capacity or left to the solver for `TBA`.
    pub fn add_node_capacity(
        &mut self,
        resource: &str,
        caps: &BTreeMap<NodeId, Capacity>,
        f: &NodeCapFn<'_>,
    ) -> Result<(), OptError> {
        self.check_nodes(caps)?;
        for (v, c) in caps {
            if let Capacity::Value(x) = c {
                if x.is_nan() || *x < 0.0 {
                    return Err(OptError::BadCapacity(format!("node {v}"), *x));
                }
            }
        }
        self.claim_node_resource("node_capacity", resource)?;
        let mut loads = BTreeMap::new();
        let mut tba = BTreeMap::new();
        for (&v, &cap) in caps {
            let terms = self.path_terms(
                v,
                |p, v| p.contains_node(v),
                |ci, pi| self.classes[ci].xp[pi],
                |v, tc, p| f(v, tc, p, resource),
                || format!("{resource} load of node {v}"),
            )?;
            if cap == Capacity::ToBeAllocated {
                tba.insert(v, self.tba_bound(v, resource, f));
            }
            loads.insert(v, self.add_node_load(v, resource, terms, cap)?);
        }
        self.node_loads.insert(resource.to_string(), loads);
        if !tba.is_empty() {
            self.tba.insert(resource.to_string(), tba.clone());
            if !self.bn.is_empty() {
                for (v, u) in tba {
                    self.add_tba_row(resource, v, u)?;
                }
            }
        }
        Ok(())
    }

    /// `Σ_c max_{p∋v} fn(v,c,p,r)`: the load at `v` when every class sends
    /// everything over its most expensive path through `v`.
    fn tba_bound(&self, v: NodeId, resource: &str, f: &NodeCapFn<'_>) -> f64 {
        self.classes
            .iter()
            .map(|c| {
                c.paths
                    .iter()
                    .filter(|p| p.contains_node(v))
                    .map(|p| f(v, &c.tc, p, resource))
                    .fold(0.0, f64::max)
            })
            .sum()
    }

    /// For each listed node: `nl(v,r) = Σ bp·fn` and `nl ≤ cap`. Models
    /// per-path costs such as one forwarding rule per enabled path.
    pub fn add_node_capacity_per_path(
        &mut self,
        resource: &str,
        caps: &BTreeMap<NodeId, f64>,
        f: &NodeCapFn<'_>,
    ) -> Result<(), OptError> {
        self.require("node_capacity_per_path", "binary_path")?;
        self.check_nodes(caps)?;
        for (v, x) in caps {
            if x.is_nan() || *x < 0.0 {
                return Err(OptError::BadCapacity(format!("node {v}"), *x));
            }
        }
        self.claim_node_resource("node_capacity_per_path", resource)?;
        let mut loads = BTreeMap::new();
        for (&v, &cap) in caps {
            let terms = self.path_terms(
                v,
                |p, v| p.contains_node(v),
                |ci, pi| self.classes[ci].bp[pi],
                |v, tc, p| f(v, tc, p, resource),
                || format!("{resource} load of node {v}"),
            )?;
            loads.insert(v, self.add_node_load(v, resource, terms, Capacity::Value(cap))?);
        }
        self.node_loads.insert(resource.to_string(), loads);
        Ok(())
    }

    /// `Σ_{v∈nodes} nc(v,r) ≤ total`.
    pub fn add_capacity_budget(&mut self, resource: &str, nodes: &[NodeId], total: f64) -> Result<(), OptError> {
        let loads = self.node_loads.get(resource);
        let mut terms = Vec::with_capacity(nodes.len());
        for v in nodes {
            match loads.and_then(|m| m.get(v)).and_then(|l| l.cap_var) {
                Some(nc) => terms.push((nc, 1.0)),
                None => {
                    return Err(OptError::MissingPrerequisite { template: "capacity_budget", missing: nc_name(*v, resource) })
                }
            }
        }
        self.mark(format!("capacity_budget_{resource}"))?;
        self.add_row(format!("capbudget_{resource}"), terms, Relation::Le, total)?;
        Ok(())
    }
}
