//! Recipe-level soundness checks recomputed from raw solution values.
//!
//! Loads are rebuilt from the path list and the traffic, without touching
//! the builder's load variables, so a wrong row in the model shows up as a
//! violation here.


use std::collections::BTreeMap;

use pathopt_core::apps::{Recipe, RecipeKind, LINK_POWER_WEIGHT, SWITCH_POWER_WEIGHT};
use pathopt_core::optmodel::{al_name, be_name, bn_name, bp_name, nc_name, xp_name};
use pathopt_core::pathgen::{AnnotatedPath, PathSet};
use pathopt_core::topology::{Capacity, LinkId, NodeId, Topology};
use pathopt_core::traffic::{TrafficClass, TrafficMatrix};
use pathopt_lp::Solution;

pub const TOL: f64 = 1e-6;

struct View<'a> {
    sol: &'a Solution,
    out: Vec<String>,
}

impl View<'_> {
    fn get(&self, name: &str) -> f64 {
        self.sol.value(name).unwrap_or(0.0)
    }

    fn must(&mut self, name: &str) -> f64 {
        match self.sol.value(name) {
            Some(v) => v,
            None => {
                self.out.push(format!("missing variable {name}"));
                0.0
            }
        }
    }

    fn le(&mut self, what: impl FnOnce() -> String, lhs: f64, rhs: f64) {
        if lhs > rhs + TOL {
            self.out.push(format!("{}: {lhs} > {rhs}", what()));
        }
    }

    fn binary(&mut self, name: &str) -> f64 {
        let v = self.must(name);
        if v.min(1.0 - v).abs() > TOL {
            self.out.push(format!("{name} = {v} is not binary"));
        }
        v
    }
}

fn on_link(p: &AnnotatedPath, l: LinkId) -> bool {
    p.nodes.windows(2).any(|w| (w[0], w[1]) == l)
}

/// `Σ_{c,p ∋ l} x_{c,p}·f(c)` for every link.
fn link_loads(
    topo: &Topology,
    tm: &TrafficMatrix,
    sel: &PathSet,
    v: &View<'_>,
    f: impl Fn(&TrafficClass) -> f64,
) -> BTreeMap<LinkId, f64> {
    let mut out = BTreeMap::new();
    for l in topo.links() {
        let id = l.id();
        let mut load = 0.0;
        for tc in &tm.classes {
            for (i, p) in sel.get(tc.id).iter().enumerate() {
                if on_link(p, id) {
                    load += v.get(&xp_name(tc.id, i)) * f(tc);
                }
            }
        }
        out.insert(id, load);
    }
    out
}

/// Processing load at `v` from classes whose path places a middlebox there.
fn mbox_load(tm: &TrafficMatrix, sel: &PathSet, view: &View<'_>, v: NodeId) -> f64 {
    let mut load = 0.0;
    for tc in &tm.classes {
        for (i, p) in sel.get(tc.id).iter().enumerate() {
            if p.mbox.contains(&v) {
                load += view.get(&xp_name(tc.id, i)) * tc.vol_flows * tc.cpu_cost;
            }
        }
    }
    load
}

fn bandwidth_caps(topo: &Topology) -> BTreeMap<LinkId, f64> {
    topo.links()
        .iter()
        .filter_map(|l| l.resource_caps.get("bandwidth").filter(|c| c.is_finite()).map(|c| (l.id(), *c)))
        .collect()
}

/// Violations of conservation, capacity, activation and allocation rules
/// for a solution of `recipe` over `sel`. Also checks that the reported
/// objective equals the recomputed one.
pub fn check(recipe: &Recipe, topo: &Topology, tm: &TrafficMatrix, sel: &PathSet, sol: &Solution) -> Vec<String> {
    let mut v = View { sol, out: Vec::new() };
    let routed: Vec<u32> = match recipe.kind {
        RecipeKind::ElasticTree { .. } => tm.classes.iter().filter(|c| c.vol_bytes > 0.0).map(|c| c.id).collect(),
        _ => tm.classes.iter().map(|c| c.id).collect(),
    };
    for tc in &tm.classes {
        let mut sum = 0.0;
        for i in 0..sel.get(tc.id).len() {
            let x = v.must(&xp_name(tc.id, i));
            if !(-TOL..=1.0 + TOL).contains(&x) {
                v.out.push(format!("{} = {x} outside [0, 1]", xp_name(tc.id, i)));
            }
            sum += x;
        }
        let al = v.must(&al_name(tc.id));
        if (sum - al).abs() > TOL {
            v.out.push(format!("class {}: Σx = {sum} but allocation {al}", tc.id));
        }
        if routed.contains(&tc.id) && (al - 1.0).abs() > TOL {
            v.out.push(format!("class {} must be fully routed, allocation {al}", tc.id));
        }
    }

    let bw = bandwidth_caps(topo);
    let recomputed = match &recipe.kind {
        RecipeKind::Te => {
            let loads = link_loads(topo, tm, sel, &v, |c| c.vol_bytes);
            let mut worst: f64 = 0.0;
            for (l, cap) in &bw {
                let load = loads[l];
                let norm = if *cap > 0.0 { load / cap } else { load };
                v.le(|| format!("link {l:?} normalized load"), norm, if *cap > 0.0 { 1.0 } else { 0.0 });
                worst = worst.max(norm);
            }
            worst
        }
        RecipeKind::Simple => {
            for (l, load) in link_loads(topo, tm, sel, &v, |c| c.vol_bytes) {
                if let Some(cap) = bw.get(&l) {
                    v.le(|| format!("link {l:?} bandwidth"), load, *cap);
                }
            }
            let mut worst: f64 = 0.0;
            for n in topo.nodes() {
                if !(n.has_service("fw") || n.has_service("ids")) {
                    continue;
                }
                if let Some(Capacity::Value(cap)) = n.resource_caps.get("cpu") {
                    let util = mbox_load(tm, sel, &v, n.id) / cap;
                    v.le(|| format!("node {} cpu utilization", n.id), util, 1.0);
                    worst = worst.max(util);
                }
            }
            for n in topo.nodes() {
                if let Some(Capacity::Value(t)) = n.resource_caps.get("tcam") {
                    let mut rules = 0.0;
                    for tc in &tm.classes {
                        for (i, p) in sel.get(tc.id).iter().enumerate() {
                            if p.nodes.contains(&n.id) {
                                rules += v.get(&bp_name(tc.id, i));
                            }
                        }
                    }
                    v.le(|| format!("node {} tcam", n.id), rules, *t);
                }
            }
            check_disable(&mut v, tm, sel);
            worst
        }
        RecipeKind::ElasticTree { switch_power, link_power } => {
            for (l, load) in link_loads(topo, tm, sel, &v, |c| c.vol_bytes) {
                if let Some(cap) = bw.get(&l) {
                    v.le(|| format!("link {l:?} bandwidth"), load, *cap);
                }
            }
            check_disable(&mut v, tm, sel);
            for tc in &tm.classes {
                for (i, p) in sel.get(tc.id).iter().enumerate() {
                    let bp = v.get(&bp_name(tc.id, i));
                    for n in &p.nodes {
                        let bn = v.binary(&bn_name(*n));
                        v.le(|| format!("class {} path {i} on but node {n} off", tc.id), bp, bn);
                    }
                    for w in p.nodes.windows(2) {
                        let be = v.binary(&be_name((w[0], w[1])));
                        v.le(|| format!("class {} path {i} on but link {:?} off", tc.id, (w[0], w[1])), bp, be);
                    }
                }
            }
            let sw: f64 = topo.nodes().iter().map(|n| v.get(&bn_name(n.id)) * switch_power.get(&n.id).copied().unwrap_or(1.0)).sum();
            let ln: f64 = topo.links().iter().map(|l| v.get(&be_name(l.id())) * link_power.get(&l.id()).copied().unwrap_or(1.0)).sum();
            SWITCH_POWER_WEIGHT * sw + LINK_POWER_WEIGHT * ln
        }
        RecipeKind::ElasticScaling { budget_fraction } => {
            check_disable(&mut v, tm, sel);
            let mut worst: f64 = 0.0;
            let mut on = 0.0;
            for n in topo.nodes() {
                let load = mbox_load(tm, sel, &v, n.id);
                let nc = v.must(&nc_name(n.id, "cpu"));
                let bn = v.binary(&bn_name(n.id));
                on += bn;
                v.le(|| format!("node {} cpu load over allocation", n.id), load, nc);
                if bn < 0.5 {
                    v.le(|| format!("disabled node {} holds cpu", n.id), nc.abs(), 0.0);
                }
                worst = worst.max(load);
            }
            v.le(|| "node budget".into(), on, budget_fraction * topo.num_nodes() as f64);
            for tc in &tm.classes {
                for (i, p) in sel.get(tc.id).iter().enumerate() {
                    let bp = v.get(&bp_name(tc.id, i));
                    let some: f64 = p.nodes.iter().map(|n| v.get(&bn_name(*n))).sum();
                    v.le(|| format!("class {} path {i} on with every node off", tc.id), bp, some);
                }
            }
            worst
        }
    };
    if sol.status.is_optimal() && (sol.objective - recomputed).abs() > TOL * (1.0 + recomputed.abs()) {
        v.out.push(format!("reported objective {} but recomputed {recomputed}", sol.objective));
    }
    v.out
}

fn check_disable(v: &mut View<'_>, tm: &TrafficMatrix, sel: &PathSet) {
    for tc in &tm.classes {
        for i in 0..sel.get(tc.id).len() {
            let bp = v.binary(&bp_name(tc.id, i));
            let x = v.get(&xp_name(tc.id, i));
            v.le(|| format!("class {} path {i} carries traffic while disabled", tc.id), x, bp);
        }
    }
}
