use std::fmt;

use pathopt_lp::Solution;

use super::{bn_name, OptBuilder};
use crate::topology::{LinkId, NodeId};

/// A broken model invariant in a solved assignment.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// `Σ_p x_{c,p} ≠ a_c`.
    Conservation { class: u32, sum: f64, allocated: f64 },
    LinkOverload { link: LinkId, resource: String, load: f64, cap: f64 },
    NodeOverload { node: NodeId, resource: String, load: f64, cap: f64 },
    /// A path carries traffic or is enabled while something it needs is off.
    Activation { class: u32, path: usize, detail: String },
    /// A disabled node was given capacity of a to-be-allocated resource.
    CapacityOnDisabledNode { node: NodeId, resource: String, allocated: f64 },
    Fractional { var: String, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Conservation { class, sum, allocated } => {
                write!(f, "class {class}: path fractions sum to {sum}, allocation is {allocated}")
            }
            Violation::LinkOverload { link, resource, load, cap } => {
                write!(f, "link {}->{}: {resource} load {load} exceeds {cap}", link.0, link.1)
            }
            Violation::NodeOverload { node, resource, load, cap } => {
                write!(f, "node {node}: {resource} load {load} exceeds {cap}")
            }
            Violation::Activation { class, path, detail } => write!(f, "class {class} path {path}: {detail}"),
            Violation::CapacityOnDisabledNode { node, resource, allocated } => {
                write!(f, "node {node} is disabled but holds {allocated} of {resource}")
            }
            Violation::Fractional { var, value } => write!(f, "binary {var} = {value}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    /// False when the solution carried no assignment to check.
    pub checked: bool,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl OptBuilder<'_> {
    /// Checks a solved assignment against the templates that were applied:
    /// flow conservation, capacity safety (loads recomputed from `x` and
    /// `bp`), activation soundness and zero capacity on disabled nodes.
    pub fn audit(&self, sol: &Solution, tol: f64) -> AuditReport {
        let mut out = AuditReport::default();
        if !sol.status.has_solution() {
            return out;
        }
        out.checked = true;
        let val = |j: usize| sol.value(&self.model.var(j).name).unwrap_or(0.0);
        let v = &mut out.violations;

        for j in self.model.binaries() {
            let x = val(j);
            if x.min(1.0 - x) > tol {
                v.push(Violation::Fractional { var: self.model.var(j).name.clone(), value: x });
            }
        }

        if self.has_template("allocate_flow") {
            for c in &self.classes {
                let sum: f64 = c.xp.iter().map(|&x| val(x)).sum();
                let allocated = val(c.al);
                if (sum - allocated).abs() > tol {
                    v.push(Violation::Conservation { class: c.tc.id, sum, allocated });
                }
            }
        }

        for (r, loads) in &self.link_loads {
            for (l, lv) in loads {
                let load: f64 = lv.terms.iter().map(|&(j, k)| k * val(j)).sum();
                if load > lv.cap + tol || (load - val(lv.var)).abs() > tol {
                    v.push(Violation::LinkOverload { link: *l, resource: r.clone(), load, cap: lv.cap });
                }
            }
        }
        for (r, loads) in &self.node_loads {
            for (n, lv) in loads {
                let load: f64 = lv.terms.iter().map(|&(j, k)| k * val(j)).sum();
                let cap = lv.cap_var.map_or(lv.cap, val);
                if load > cap + tol || cap > lv.cap + tol {
                    v.push(Violation::NodeOverload { node: *n, resource: r.clone(), load, cap });
                }
            }
        }

        for &(ci, pi) in &self.disabled_rows {
            let c = &self.classes[ci];
            let (x, b) = (val(c.xp[pi]), val(c.bp[pi]));
            if x > b + tol {
                v.push(Violation::Activation { class: c.tc.id, path: pi, detail: format!("x = {x} with bp = {b}") });
            }
        }
        for &ci in &self.require_all {
            let c = &self.classes[ci];
            for (pi, p) in c.paths.iter().enumerate() {
                let b = val(c.bp[pi]);
                if let Some(off) = p.nodes.iter().find(|n| b > val(self.bn[n]) + tol) {
                    v.push(Violation::Activation { class: c.tc.id, path: pi, detail: format!("enabled through disabled node {off}") });
                }
            }
        }
        for &ci in &self.require_some {
            let c = &self.classes[ci];
            for (pi, p) in c.paths.iter().enumerate() {
                let b = val(c.bp[pi]);
                let on: f64 = p.nodes.iter().map(|n| val(self.bn[n])).sum();
                if b > on + tol {
                    v.push(Violation::Activation { class: c.tc.id, path: pi, detail: "enabled with every node disabled".into() });
                }
            }
        }
        for &ci in &self.require_edges {
            let c = &self.classes[ci];
            for (pi, p) in c.paths.iter().enumerate() {
                let b = val(c.bp[pi]);
                if let Some(l) = p.links().find(|l| b > val(self.be[l]) + tol) {
                    v.push(Violation::Activation {
                        class: c.tc.id,
                        path: pi,
                        detail: format!("enabled through disabled link {}->{}", l.0, l.1),
                    });
                }
            }
        }

        if !self.bn.is_empty() {
            for (r, nodes) in &self.tba {
                for n in nodes.keys() {
                    let on = sol.value(&bn_name(*n)).unwrap_or(0.0);
                    let nc = self.node_loads[r][n].cap_var.map_or(0.0, val);
                    if on < 0.5 && nc > tol {
                        v.push(Violation::CapacityOnDisabledNode { node: *n, resource: r.clone(), allocated: nc });
                    }
                }
            }
        }
        out
    }

    /// Checks, without solving, that every activation relation the applied
    /// templates promise has its row: `x ≤ bp`, `bp ≤ bn`, `bp ≤ Σ bn`,
    /// `bp ≤ be` and `nc ≤ U·bn` for to-be-allocated capacities.
    /// Returns the names of missing rows.
    pub fn missing_activation_rows(&self) -> Vec<String> {
        let mut want = Vec::new();
        for &(ci, pi) in &self.disabled_rows {
            want.push(format!("pathdis_c{}_p{pi}", self.classes[ci].tc.id));
        }
        for &ci in &self.require_all {
            let c = &self.classes[ci];
            for (pi, p) in c.paths.iter().enumerate() {
                want.extend(p.nodes.iter().map(|n| format!("reqnode_c{}_p{pi}_{n}", c.tc.id)));
            }
        }
        for &ci in &self.require_some {
            let c = &self.classes[ci];
            want.extend((0..c.paths.len()).map(|pi| format!("reqsome_c{}_p{pi}", c.tc.id)));
        }
        for &ci in &self.require_edges {
            let c = &self.classes[ci];
            for (pi, p) in c.paths.iter().enumerate() {
                want.extend(p.links().map(|(s, d)| format!("reqedge_c{}_p{pi}_{s}_{d}", c.tc.id)));
            }
        }
        if !self.bn.is_empty() {
            for (r, nodes) in &self.tba {
                want.extend(nodes.keys().map(|n| format!("tba_{n}_{r}")));
            }
        }
        want.retain(|name| self.model.row_index(name).is_none());
        want
    }
}
