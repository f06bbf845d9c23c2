//! Seeded generators for small integer LP and MILP instances.

use pathopt_lp::{ProgramModel, Relation, Sense, VarKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rational::{IntLp, Rel};

pub fn random_lp(seed: u64, max_vars: usize, max_rows: usize) -> IntLp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(1..=max_rows);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = match rng.random_range(0..20) {
            0..=13 => Some(0),
            14..=16 => Some(-rng.random_range(1..=5)),
            _ => None,
        };
        let hi = if rng.random_bool(0.4) {
            Some(lo.unwrap_or(0) + rng.random_range(0..=10))
        } else {
            None
        };
        lower.push(lo);
        upper.push(hi);
    }
    let density = rng.random_range(0.15..0.6);
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.random_bool(density) {
                let a = rng.random_range(-5..=5);
                if a != 0 {
                    terms.push((j, a));
                }
            }
        }
        let rel = match rng.random_range(0..20) {
            0..=11 => Rel::Le,
            12..=16 => Rel::Ge,
            _ => Rel::Eq,
        };
        rows.push((terms, rel, rng.random_range(-10..=20)));
    }
    let cost = (0..n).map(|_| rng.random_range(-5..=5)).collect();
    IntLp { cost, maximize: rng.random_bool(0.5), lower, upper, rows }
}

/// Mixed instance with `bins` binaries listed first, plus a few bounded continuous columns.
pub fn random_milp(seed: u64, max_bins: usize) -> (IntLp, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0005_eed0_fb1b);
    let bins = rng.random_range(1..=max_bins);
    let conts = rng.random_range(0..=4);
    let n = bins + conts;
    let m = rng.random_range(1..=6);
    let mut lower = vec![Some(0); n];
    let mut upper = vec![Some(1); n];
    for j in bins..n {
        lower[j] = Some(0);
        upper[j] = if rng.random_bool(0.7) { Some(rng.random_range(1..=8)) } else { None };
    }
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.5) {
                let a = rng.random_range(-6..=6);
                if a != 0 {
                    terms.push((j, a));
                }
            }
        }
        let rel = match rng.random_range(0..10) {
            0..=6 => Rel::Le,
            7..=8 => Rel::Ge,
            _ => Rel::Eq,
        };
        rows.push((terms, rel, rng.random_range(-3..=12)));
    }
    let cost = (0..n).map(|_| rng.random_range(-6..=6)).collect();
    (IntLp { cost, maximize: rng.random_bool(0.5), lower, upper, rows }, bins)
}

pub fn to_model(lp: &IntLp, binaries: usize) -> ProgramModel {
    let mut m = ProgramModel::new();
    for j in 0..lp.cost.len() {
        let lo = lp.lower[j].map_or(f64::NEG_INFINITY, |v| v as f64);
        let hi = lp.upper[j].map_or(f64::INFINITY, |v| v as f64);
        let kind = if j < binaries { VarKind::Binary } else { VarKind::Continuous };
        m.add_var(&format!("x{j}"), lo, hi, kind).unwrap();
    }
    for (i, (terms, rel, rhs)) in lp.rows.iter().enumerate() {
        let rel = match rel {
            Rel::Le => Relation::Le,
            Rel::Ge => Relation::Ge,
            Rel::Eq => Relation::Eq,
        };
        m.add_constraint(&format!("r{i}"), terms.iter().map(|&(j, a)| (j, a as f64)), rel, *rhs as f64).unwrap();
    }
    let sense = if lp.maximize { Sense::Maximize } else { Sense::Minimize };
    m.set_objective(sense, lp.cost.iter().enumerate().map(|(j, &c)| (j, c as f64))).unwrap();
    m
}

/// Exhaustive optimum over binary assignments, solving each continuous
/// remainder exactly.
pub fn brute_force_milp(lp: &IntLp, bins: usize) -> super::rational::Outcome {
    use super::rational::{solve, Outcome};
    let mut best: Option<super::rational::Q> = None;
    let mut unbounded = false;
    for mask in 0u32..(1u32 << bins) {
        let mut sub = lp.clone();
        for j in 0..bins {
            let v = ((mask >> j) & 1) as i64;
            sub.lower[j] = Some(v);
            sub.upper[j] = Some(v);
        }
        match solve(&sub) {
            Outcome::Optimal(v) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        if lp.maximize {
                            v > *b
                        } else {
                            v < *b
                        }
                    }
                };
                if better {
                    best = Some(v);
                }
            }
            Outcome::Unbounded => unbounded = true,
            Outcome::Infeasible => {}
        }
    }
    if unbounded {
        return Outcome::Unbounded;
    }
    best.map_or(Outcome::Infeasible, Outcome::Optimal)
}
