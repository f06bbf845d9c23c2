//! Recipes on fixtures and random instances, against closed-form optima,
//! the arc formulation, and the recomputed soundness checks.

mod support;

use std::collections::BTreeMap;
use std::path::PathBuf;

use pathopt_core::apps::{
    elastictree_baseline, recipe_by_name, recipe_elastic_scaling, recipe_elastictree, recipe_simple, recipe_te, AppError,
    Recipe, RecipeKind,
};
use pathopt_core::pathgen::{generate_paths, select_paths, GenParams, PathSet, SelectStrategy};
use pathopt_core::topology::{fat_tree, Capacity, Link, Node, NodeId, Topology};
use pathopt_core::traffic::{uniform_matrix, TrafficClass, TrafficMatrix};
use pathopt_lp::{solve_milp, MilpOptions, Solution, Status};
use proptest::prelude::*;
use serde_json::json;
use support::soundness;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn solve_all(recipe: &Recipe, topo: &Topology, tm: &TrafficMatrix) -> (PathSet, Solution) {
    let tm = recipe.prepare_traffic(tm);
    let paths = generate_paths(topo, &tm, &*recipe.predicate(), &recipe.gen).unwrap();
    let sol = recipe.build(topo, &tm, &paths).unwrap().solve(&MilpOptions::default());
    (paths, sol)
}

fn assert_sound(recipe: &Recipe, topo: &Topology, tm: &TrafficMatrix, paths: &PathSet, sol: &Solution) {
    let v = soundness::check(recipe, topo, &recipe.prepare_traffic(tm), paths, sol);
    assert!(v.is_empty(), "{}: {v:#?}", recipe.name);
}

#[test]
fn recipes_resolve_by_name() {
    for name in ["te", "te-shortest", "simple", "elastictree", "elastic-scaling"] {
        assert_eq!(recipe_by_name(name, &json!(null)).unwrap().name, name);
    }
    assert_eq!(recipe_by_name("te-shortest", &json!({})).unwrap().strategy, SelectStrategy::Shortest);
    let r = recipe_by_name("elastic-scaling", &json!({"budget_fraction": 0.25})).unwrap();
    assert_eq!(r.kind, RecipeKind::ElasticScaling { budget_fraction: 0.25 });
    let r = recipe_by_name(
        "elastictree",
        &json!({"switch_power": {"3": 2.0}, "link_power": [{"src": 0, "dst": 1, "power": 0.5}]}),
    )
    .unwrap();
    assert_eq!(
        r.kind,
        RecipeKind::ElasticTree { switch_power: BTreeMap::from([(3, 2.0)]), link_power: BTreeMap::from([((0, 1), 0.5)]) }
    );
}

#[test]
fn unknown_recipes_and_bad_params_are_rejected() {
    assert!(matches!(recipe_by_name("nope", &json!(null)), Err(AppError::UnknownRecipe(_))));
    assert!(matches!(recipe_by_name("te", &json!({"x": 1})), Err(AppError::BadParams { .. })));
    assert!(matches!(
        recipe_by_name("elastic-scaling", &json!({"budget_fraction": 1.5})),
        Err(AppError::BadParams { .. })
    ));
    assert!(matches!(recipe_by_name("elastictree", &json!({"power": 1})), Err(AppError::BadParams { .. })));
}

fn triangle(c01: f64, c12: f64, c02: f64) -> Topology {
    let nodes = (0..3).map(|i| Node::new(i, format!("t{i}"))).collect();
    let links = vec![
        Link::new(0, 1).with_capacity("bandwidth", c01),
        Link::new(1, 2).with_capacity("bandwidth", c12),
        Link::new(0, 2).with_capacity("bandwidth", c02),
    ];
    Topology::from_undirected(nodes, links).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// One class over a triangle: the direct link and the two-hop detour.
    /// Balancing the normalized loads `v·x/c02 = v·(1−x)/min(c01, c12)`
    /// gives the optimum `v / (c02 + min(c01, c12))`, feasible only up to 1.
    #[test]
    fn te_on_a_triangle_balances_both_routes(c01 in 1u32..50, c12 in 1u32..50, c02 in 1u32..50, vol in 1u32..40) {
        let (c01, c12, c02, vol) = (c01 as f64, c12 as f64, c02 as f64, vol as f64);
        let topo = triangle(c01, c12, c02);
        let tm = TrafficMatrix { classes: vec![TrafficClass::new(0, 0, 2, vol)] };
        let (paths, sol) = solve_all(&recipe_te(), &topo, &tm);
        let want = vol / (c02 + c01.min(c12));
        if want > 1.0 + 1e-9 {
            prop_assert_eq!(sol.status, Status::Infeasible);
            return Ok(());
        }
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!((sol.objective - want).abs() < 1e-7, "got {} want {}", sol.objective, want);
        let v = soundness::check(&recipe_te(), &topo, &tm, &paths, &sol);
        prop_assert!(v.is_empty(), "{:?}", v);
    }
}

#[test]
fn te_fixtures_match_hand_optima() {
    // Triangle and diamond both split 8 units over two disjoint capacity-10 routes.
    for (t, tr) in [("triangle.json", "triangle_traffic.json"), ("diamond.json", "diamond_traffic.json")] {
        let topo = Topology::load(fixture(t)).unwrap();
        let tm = TrafficMatrix::load(fixture(tr), Some(&topo)).unwrap();
        let (paths, sol) = solve_all(&recipe_te(), &topo, &tm);
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 0.4).abs() < 1e-9, "{t}: {}", sol.objective);
        assert_sound(&recipe_te(), &topo, &tm, &paths, &sol);
    }
}

#[test]
fn te_with_only_a_dead_link_is_infeasible() {
    let nodes = (0..2).map(|i| Node::new(i, format!("n{i}"))).collect();
    let topo = Topology::from_undirected(nodes, vec![Link::new(0, 1).with_capacity("bandwidth", 0.0)]).unwrap();
    let tm = TrafficMatrix { classes: vec![TrafficClass::new(0, 0, 1, 1.0)] };
    let (_, sol) = solve_all(&recipe_te(), &topo, &tm);
    assert_eq!(sol.status, Status::Infeasible);
}

fn chain() -> (Topology, TrafficMatrix) {
    let topo = Topology::load(fixture("chain.json")).unwrap();
    let tm = TrafficMatrix::load(fixture("chain_traffic.json"), Some(&topo)).unwrap();
    (topo, tm)
}

/// With every chain route available, firewall work can be spread in
/// proportion to capacity, so the best utilization is total work over
/// total firewall capacity (the IDS tier has twice the room).
#[test]
fn simple_all_paths_spreads_work_over_firewall_capacity() {
    let (topo, tm) = chain();
    let recipe = recipe_simple();
    let (paths, sol) = solve_all(&recipe, &topo, &tm);
    let work: f64 = tm.classes.iter().map(|c| c.vol_flows * c.cpu_cost).sum();
    let fw_cap: f64 = topo
        .nodes()
        .iter()
        .filter(|n| n.has_service("fw"))
        .filter_map(|n| n.resource_caps.get("cpu").and_then(|c| c.value()))
        .sum();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - work / fw_cap).abs() < 1e-9, "{} vs {}", sol.objective, work / fw_cap);
    assert_sound(&recipe, &topo, &tm, &paths, &sol);
}

#[test]
fn simple_paths_visit_fw_then_ids() {
    let (topo, tm) = chain();
    let recipe = recipe_simple();
    let tm = recipe.prepare_traffic(&tm);
    let paths = generate_paths(&topo, &tm, &*recipe.predicate(), &recipe.gen).unwrap();
    assert!(paths.total_paths() > 0);
    for (_, ps) in paths.iter() {
        for p in ps {
            assert_eq!(p.mbox.len(), 2);
            assert!(topo.has_service(p.mbox[0], "fw") && topo.has_service(p.mbox[1], "ids"));
            let at = |v: NodeId| p.nodes.iter().position(|w| *w == v).unwrap();
            assert!(at(p.mbox[0]) < at(p.mbox[1]));
        }
    }
}

#[test]
fn tight_tcam_forces_fewer_enabled_paths() {
    let (topo, tm) = chain();
    // One rule slot per switch at the two ingresses leaves a single path per ingress.
    let nodes: Vec<Node> = topo
        .nodes()
        .iter()
        .map(|n| if n.id <= 1 { n.clone().with_capacity("tcam", Capacity::Value(2.0)) } else { n.clone() })
        .collect();
    let topo = Topology::new(nodes, topo.links().to_vec()).unwrap();
    let recipe = recipe_simple();
    // Over all candidates the binaries make the tree too large; a few short
    // paths per class keep the capacity choice while staying small.
    let ptm = recipe.prepare_traffic(&tm);
    let all = generate_paths(&topo, &ptm, &*recipe.predicate(), &recipe.gen).unwrap();
    let paths = select_paths(&all, SelectStrategy::Shortest, 4, 0, None).unwrap();
    let sol = recipe.build(&topo, &ptm, &paths).unwrap().solve(&MilpOptions::default());
    assert_eq!(sol.status, Status::Optimal);
    assert_sound(&recipe, &topo, &tm, &paths, &sol);
    let enabled: f64 = sol.values.iter().filter(|(k, _)| k.starts_with("bp_c0_") || k.starts_with("bp_c1_")).map(|(_, v)| v).sum();
    assert!(enabled <= 2.0 + 1e-9);
}

#[test]
fn elastic_scaling_respects_the_budget() {
    let (topo, tm) = chain();
    for fraction in [0.25, 0.5, 1.0] {
        let recipe = recipe_elastic_scaling(fraction);
        let (paths, sol) = solve_all(&recipe, &topo, &tm);
        assert_eq!(sol.status, Status::Optimal, "fraction {fraction}");
        assert_sound(&recipe, &topo, &tm, &paths, &sol);
    }
    // With every middlebox usable, the work splits evenly over the four of them.
    let recipe = recipe_elastic_scaling(1.0);
    let (_, sol) = solve_all(&recipe, &topo, &tm);
    let work: f64 = tm.classes.iter().map(|c| c.vol_flows * c.cpu_cost).sum();
    assert!((sol.objective - work / 4.0).abs() < 1e-9, "{}", sol.objective);
}

#[test]
fn elastictree_k2_powers_the_single_route() {
    let topo = fat_tree(2).unwrap();
    let tm = uniform_matrix(&topo, 1.0);
    let recipe = recipe_elastictree(BTreeMap::new(), BTreeMap::new());
    let (paths, sol) = solve_all(&recipe, &topo, &tm);
    // Both directions share 5 switches and use all 8 directed links.
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - (0.75 * 5.0 + 0.25 * 8.0)).abs() < 1e-9);
    assert_sound(&recipe, &topo, &tm, &paths, &sol);
}

fn random_graph(n: usize, edges: &[(usize, usize)], cap: f64) -> Topology {
    let nodes = (0..n).map(|i| Node::new(i as NodeId, format!("r{i}"))).collect();
    let mut links = Vec::new();
    // A ring keeps the graph connected.
    for i in 0..n {
        links.push(Link::new(i as NodeId, ((i + 1) % n) as NodeId).with_capacity("bandwidth", cap));
    }
    let mut seen: std::collections::BTreeSet<(usize, usize)> = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n))).collect();
    for &(a, b) in edges {
        if a != b && seen.insert((a.min(b), a.max(b))) {
            links.push(Link::new(a as NodeId, b as NodeId).with_capacity("bandwidth", cap));
        }
    }
    Topology::from_undirected(nodes, links).unwrap()
}

fn arb_instance() -> impl Strategy<Value = (Topology, TrafficMatrix)> {
    (3usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec((0..n, 0..n), 0..n),
            prop::collection::vec((0..n, 0..n, 1u32..5), 1..4),
            prop_oneof![Just(f64::INFINITY), 4.0..12.0f64],
        )
            .prop_map(move |(e, cls, cap)| {
                let topo = random_graph(n, &e, cap);
                let classes = cls
                    .into_iter()
                    .filter(|(a, b, _)| a != b)
                    .enumerate()
                    .map(|(i, (a, b, v))| TrafficClass::new(i as u32, a as NodeId, b as NodeId, v as f64))
                    .collect();
                (topo, TrafficMatrix { classes })
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// The path program over every simple path and the arc program describe
    /// the same choices when nothing limits path length, so their optima agree.
    #[test]
    fn elastictree_paths_and_arcs_agree((topo, tm) in arb_instance()) {
        prop_assume!(!tm.classes.is_empty());
        let mut recipe = recipe_elastictree(BTreeMap::new(), BTreeMap::new());
        recipe.gen = GenParams { max_len: topo.num_nodes(), max_count: 10_000, ..recipe.gen };
        let (paths, sol) = solve_all(&recipe, &topo, &tm);
        let arcs = solve_milp(&elastictree_baseline(&topo, &tm, &BTreeMap::new(), &BTreeMap::new()).unwrap(), &MilpOptions::default());
        prop_assert_eq!(sol.status, arcs.status);
        if sol.status == Status::Optimal {
            prop_assert!((sol.objective - arcs.objective).abs() < 1e-6, "paths {} arcs {}", sol.objective, arcs.objective);
            let v = soundness::check(&recipe, &topo, &tm, &paths, &sol);
            prop_assert!(v.is_empty(), "{:?}", v);
        }
    }

    /// Selected-path optima can only be worse than the all-paths optimum,
    /// and every solved program passes the recomputed checks.
    #[test]
    fn te_selection_never_beats_all_paths((topo, tm) in arb_instance(), n in 1usize..4, seed in any::<u64>()) {
        prop_assume!(!tm.classes.is_empty());
        // Loads are normalized by bandwidth, so TE needs finite caps.
        prop_assume!(topo.links().iter().all(|l| l.resource_caps.get("bandwidth").is_some_and(|c| c.is_finite())));
        let recipe = recipe_te();
        let (all, full) = solve_all(&recipe, &topo, &tm);
        let sel = select_paths(&all, SelectStrategy::Random, n, seed, None).unwrap();
        let part = recipe.build(&topo, &tm, &sel).unwrap().solve(&MilpOptions::default());
        if full.status == Status::Optimal {
            prop_assert!(soundness::check(&recipe, &topo, &tm, &all, &full).is_empty());
        }
        if part.status == Status::Optimal {
            prop_assert_eq!(full.status, Status::Optimal);
            prop_assert!(part.objective >= full.objective - 1e-9);
            let v = soundness::check(&recipe, &topo, &tm, &sel, &part);
            prop_assert!(v.is_empty(), "{:?}", v);
        }
    }
}
