//! The churn objective `(1−w)·max load + w·Diff` against a hand-solved
//! trade-off and against the plain min-max program on random instances.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use pathopt_core::apps::{recipe_te, Recipe};
use pathopt_core::optmodel::{xp_name, DiffMode, PrevSolution};
use pathopt_core::pathgen::{generate_paths, select_paths, PathSet, SelectStrategy};
use pathopt_core::topology::{Link, Node, NodeId, Topology};
use pathopt_core::traffic::{TrafficClass, TrafficMatrix};
use pathopt_lp::{MilpOptions, Solution, Status};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Max load and Diff of a churn solve.
fn churn_solve(recipe: &Recipe, topo: &Topology, tm: &TrafficMatrix, paths: &PathSet, prev: &PrevSolution, w: f64) -> (Solution, f64, f64) {
    let mut b = recipe.build(topo, tm, paths).unwrap();
    let base = recipe.churn_base().unwrap();
    b.add_min_churn(prev, w, &base, DiffMode::Max).unwrap();
    let sol = b.solve(&MilpOptions::default());
    let load = b.max_load(&sol, &base).unwrap_or(f64::NAN);
    let diff = sol.value("Diff").unwrap_or(f64::NAN);
    (sol, load, diff)
}

/// Triangle with capacity 10 everywhere and 8 units from 0 to 2, all of it
/// previously on the direct link. With `x` on the direct link the objective
/// is `(1−w)·0.8x + w·(1−x)` for `x ≥ 1/2`, so the optimum stays put for
/// `w > 4/9` and balances at `x = 1/2` below that.
#[test]
fn triangle_trade_off_matches_hand_solution() {
    let topo = Topology::load(fixture("triangle.json")).unwrap();
    let tm = TrafficMatrix::load(fixture("triangle_traffic.json"), Some(&topo)).unwrap();
    let recipe = recipe_te();
    let paths = generate_paths(&topo, &tm, &*recipe.predicate(), &recipe.gen).unwrap();
    let c = tm.classes[0].id;
    let direct = paths.get(c).iter().position(|p| p.nodes.len() == 2).unwrap();
    let prev = PrevSolution::new(BTreeMap::from([((c, paths.get(c)[direct].clone()), 1.0)])).unwrap();
    for (w, want_x, want_obj) in [(0.3, 0.5, 0.7 * 0.4 + 0.3 * 0.5), (0.6, 1.0, 0.4 * 0.8), (0.0, 0.5, 0.4), (1.0, 1.0, 0.0)] {
        let (sol, _, _) = churn_solve(&recipe, &topo, &tm, &paths, &prev, w);
        assert_eq!(sol.status, Status::Optimal, "w {w}");
        assert!((sol.objective - want_obj).abs() < 1e-9, "w {w}: {} want {want_obj}", sol.objective);
        if w > 0.0 {
            let x = sol.value(&xp_name(c, direct)).unwrap();
            assert!((x - want_x).abs() < 1e-9, "w {w}: x {x}");
        }
    }
}

#[test]
fn weight_outside_unit_interval_is_rejected() {
    let topo = Topology::load(fixture("triangle.json")).unwrap();
    let tm = TrafficMatrix::load(fixture("triangle_traffic.json"), Some(&topo)).unwrap();
    let recipe = recipe_te();
    let paths = generate_paths(&topo, &tm, &*recipe.predicate(), &recipe.gen).unwrap();
    let mut b = recipe.build(&topo, &tm, &paths).unwrap();
    let base = recipe.churn_base().unwrap();
    assert!(b.add_min_churn(&PrevSolution::default(), 1.5, &base, DiffMode::Max).is_err());
    assert!(b.add_min_churn(&PrevSolution::default(), -0.1, &base, DiffMode::Max).is_err());
}

fn ring_with_chords(n: usize, chords: &[(usize, usize)], cap: f64) -> Topology {
    let nodes = (0..n).map(|i| Node::new(i as NodeId, format!("r{i}"))).collect();
    let mut seen = BTreeSet::new();
    let mut links = Vec::new();
    let ring = (0..n).map(|i| (i, (i + 1) % n));
    for (a, b) in ring.chain(chords.iter().copied()) {
        if a != b && seen.insert((a.min(b), a.max(b))) {
            links.push(Link::new(a as NodeId, b as NodeId).with_capacity("bandwidth", cap));
        }
    }
    Topology::from_undirected(nodes, links).unwrap()
}

fn arb_te() -> impl Strategy<Value = (Topology, TrafficMatrix, usize, u64)> {
    (3usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec((0..n, 0..n), 0..n),
            prop::collection::vec((0..n, 0..n, 1u32..4), 1..5),
            8.0..20.0f64,
            1usize..4,
            any::<u64>(),
        )
            .prop_map(move |(e, cls, cap, k, seed)| {
                let classes = cls
                    .into_iter()
                    .filter(|(a, b, _)| a != b)
                    .enumerate()
                    .map(|(i, (a, b, v))| TrafficClass::new(i as u32, a as NodeId, b as NodeId, v as f64))
                    .collect();
                (ring_with_chords(n, &e, cap), TrafficMatrix { classes }, k, seed)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Re-solving an unchanged instance with `w = 1` keeps every fraction;
    /// with `w = 0` it is the plain min-max optimum.
    #[test]
    fn extreme_weights_recover_previous_and_plain_optima((topo, tm, k, seed) in arb_te()) {
        prop_assume!(!tm.classes.is_empty());
        let recipe = recipe_te();
        let all = generate_paths(&topo, &tm, &*recipe.predicate(), &recipe.gen).unwrap();
        let sel = select_paths(&all, SelectStrategy::Random, k, seed, None).unwrap();
        let plain = recipe.build(&topo, &tm, &sel).unwrap().solve(&MilpOptions::default());
        prop_assume!(plain.status == Status::Optimal);
        let prev = PrevSolution::from_solution(&sel, &plain);

        let (keep, _, diff) = churn_solve(&recipe, &topo, &tm, &sel, &prev, 1.0);
        prop_assert_eq!(keep.status, Status::Optimal);
        prop_assert!(diff.abs() < 1e-9, "Diff {}", diff);
        for (c, ps) in sel.iter() {
            for i in 0..ps.len() {
                let (a, b) = (plain.value(&xp_name(c, i)).unwrap(), keep.value(&xp_name(c, i)).unwrap());
                prop_assert!((a - b).abs() < 1e-9, "class {} path {}: {} vs {}", c, i, a, b);
            }
        }

        let (free, load, _) = churn_solve(&recipe, &topo, &tm, &sel, &prev, 0.0);
        prop_assert_eq!(free.status, Status::Optimal);
        prop_assert!((free.objective - plain.objective).abs() < 1e-9, "{} vs {}", free.objective, plain.objective);
        prop_assert!((load - plain.objective).abs() < 1e-9);
    }

    /// Raising `w` never raises `Diff` and never lowers the max load, and the
    /// reported objective is the weighted sum of the two.
    #[test]
    fn heavier_weight_trades_load_for_stability((topo, tm, k, seed) in arb_te(), prev_seed in any::<u64>()) {
        prop_assume!(!tm.classes.is_empty());
        let recipe = recipe_te();
        let all = generate_paths(&topo, &tm, &*recipe.predicate(), &recipe.gen).unwrap();
        let sel = select_paths(&all, SelectStrategy::Random, k, seed, None).unwrap();
        // A previous solution that is feasible but not optimal: every class on
        // one path drawn from a different selection.
        let other = select_paths(&all, SelectStrategy::Random, 1, prev_seed, None).unwrap();
        let prev = PrevSolution::new(other.iter().map(|(c, ps)| ((c, ps[0].clone()), 1.0)).collect()).unwrap();
        let mut last: Option<(f64, f64)> = None;
        for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let (sol, load, diff) = churn_solve(&recipe, &topo, &tm, &sel, &prev, w);
            if sol.status == Status::Infeasible {
                return Ok(());
            }
            prop_assert_eq!(sol.status, Status::Optimal);
            prop_assert!((sol.objective - ((1.0 - w) * load + w * diff)).abs() < 1e-7, "w {}", w);
            if let Some((l0, d0)) = last {
                prop_assert!(diff <= d0 + 1e-7, "w {}: Diff {} after {}", w, diff, d0);
                prop_assert!(load >= l0 - 1e-7, "w {}: load {} after {}", w, load, l0);
            }
            last = Some((load, diff));
        }
    }
}
