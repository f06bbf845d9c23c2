//! Exact two-phase tableau simplex over big rationals with Bland's rule.
//! Slow but independent of the floating-point engine under test.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

/// Small integer LP: `min/max c·x` s.t. rows, `lower ≤ x ≤ upper` (None = infinite).
#[derive(Clone, Debug)]
pub struct IntLp {
    pub cost: Vec<i64>,
    pub maximize: bool,
    pub lower: Vec<Option<i64>>,
    pub upper: Vec<Option<i64>>,
    pub rows: Vec<(Vec<(usize, i64)>, Rel, i64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Optimal(Q),
    Infeasible,
    Unbounded,
}

impl Outcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            Outcome::Optimal(q) => Some(to_f64(q)),
            _ => None,
        }
    }
}

pub fn to_f64(q: &Q) -> f64 {
    let n: f64 = q.numer().to_string().parse().unwrap();
    let d: f64 = q.denom().to_string().parse().unwrap();
    n / d
}

fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

/// One column of the shifted problem: original variable `var` equals
/// `offset + sign·column`.
struct Col {
    var: usize,
    sign: i64,
}

pub fn solve(lp: &IntLp) -> Outcome {
    let n = lp.cost.len();
    let mut cols: Vec<Col> = Vec::new();
    let mut offset = vec![0i64; n];
    // Rows of the transformed problem with column indices into `cols`.
    let mut rows: Vec<(Vec<(usize, Q)>, Rel, Q)> = Vec::new();
    for j in 0..n {
        match (lp.lower[j], lp.upper[j]) {
            (Some(l), u) => {
                offset[j] = l;
                cols.push(Col { var: j, sign: 1 });
                if let Some(u) = u {
                    rows.push((vec![(cols.len() - 1, q(1))], Rel::Le, q(u - l)));
                }
            }
            (None, Some(u)) => {
                offset[j] = u;
                cols.push(Col { var: j, sign: -1 });
            }
            (None, None) => {
                cols.push(Col { var: j, sign: 1 });
                cols.push(Col { var: j, sign: -1 });
            }
        }
    }
    let mut const_obj = Q::zero();
    for j in 0..n {
        const_obj += q(lp.cost[j] * offset[j]);
    }
    for (terms, rel, rhs) in &lp.rows {
        let mut r = q(*rhs);
        let mut t: Vec<(usize, Q)> = Vec::new();
        for &(j, a) in terms {
            r -= q(a * offset[j]);
            for (k, c) in cols.iter().enumerate() {
                if c.var == j {
                    t.push((k, q(a * c.sign)));
                }
            }
        }
        rows.push((t, *rel, r));
    }
    // Minimization costs on columns.
    let sgn = if lp.maximize { -1 } else { 1 };
    let col_cost: Vec<Q> = cols.iter().map(|c| q(sgn * lp.cost[c.var] * c.sign)).collect();

    let m = rows.len();
    let ns = cols.len();
    // Column layout: structurals, one slack/surplus per inequality, one artificial per row.
    let n_slack = rows.iter().filter(|r| r.1 != Rel::Eq).count();
    let total = ns + n_slack + m;
    let rhs_col = total;
    let mut t = vec![vec![Q::zero(); total + 1]; m];
    let mut basis = vec![0usize; m];
    let mut slack_k = ns;
    for (i, (terms, rel, rhs)) in rows.iter().enumerate() {
        let flip = rhs.is_negative();
        let s = if flip { -Q::one() } else { Q::one() };
        for (k, a) in terms {
            t[i][*k] += a * &s;
        }
        match rel {
            Rel::Le => {
                t[i][slack_k] = s.clone();
                slack_k += 1;
            }
            Rel::Ge => {
                t[i][slack_k] = -s.clone();
                slack_k += 1;
            }
            Rel::Eq => {}
        }
        t[i][rhs_col] = rhs * &s;
        let art = ns + n_slack + i;
        t[i][art] = Q::one();
        basis[i] = art;
    }
    // Phase 1: minimize the sum of artificials.
    let mut c1 = vec![Q::zero(); total];
    for i in 0..m {
        c1[ns + n_slack + i] = Q::one();
    }
    let allowed_all = vec![true; total];
    if run(&mut t, &mut basis, &c1, &allowed_all).is_err() {
        unreachable!("phase one is bounded");
    }
    let infeas: Q = (0..m).map(|i| &c1[basis[i]] * &t[i][rhs_col]).sum();
    if infeas.is_positive() {
        return Outcome::Infeasible;
    }
    // Drive zero-level artificials out of the basis where possible.
    let is_art = |k: usize| k >= ns + n_slack;
    let mut keep = vec![true; m];
    for i in 0..m {
        if !is_art(basis[i]) {
            continue;
        }
        match (0..ns + n_slack).find(|&k| !t[i][k].is_zero()) {
            Some(k) => pivot(&mut t, &mut basis, i, k),
            None => keep[i] = false,
        }
    }
    let mut t2: Vec<Vec<Q>> = Vec::new();
    let mut b2 = Vec::new();
    for i in 0..m {
        if keep[i] {
            t2.push(t[i].clone());
            b2.push(basis[i]);
        }
    }
    let mut c2 = vec![Q::zero(); total];
    c2[..ns].clone_from_slice(&col_cost);
    let allowed: Vec<bool> = (0..total).map(|k| !is_art(k)).collect();
    if run(&mut t2, &mut b2, &c2, &allowed).is_err() {
        return Outcome::Unbounded;
    }
    let val: Q = (0..b2.len()).map(|i| &c2[b2[i]] * &t2[i][rhs_col]).sum();
    let val = if lp.maximize { -val } else { val };
    Outcome::Optimal(val + const_obj)
}

fn pivot(t: &mut [Vec<Q>], basis: &mut [usize], r: usize, k: usize) {
    let p = t[r][k].clone();
    for v in t[r].iter_mut() {
        *v /= &p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r || row[k].is_zero() {
            continue;
        }
        let f = row[k].clone();
        for (v, pv) in row.iter_mut().zip(&prow) {
            if !pv.is_zero() {
                *v -= &f * pv;
            }
        }
    }
    basis[r] = k;
}

/// Bland's-rule primal simplex on a feasible tableau. Err on unboundedness.
fn run(t: &mut [Vec<Q>], basis: &mut [usize], cost: &[Q], allowed: &[bool]) -> Result<(), ()> {
    let m = t.len();
    let total = cost.len();
    loop {
        let mut enter = None;
        for k in 0..total {
            if !allowed[k] || basis.contains(&k) {
                continue;
            }
            let mut r = cost[k].clone();
            for i in 0..m {
                if !t[i][k].is_zero() {
                    r -= &cost[basis[i]] * &t[i][k];
                }
            }
            if r.is_negative() {
                enter = Some(k);
                break;
            }
        }
        let Some(k) = enter else { return Ok(()) };
        let mut leave: Option<(usize, Q)> = None;
        for i in 0..m {
            if t[i][k].is_positive() {
                let ratio = &t[i][total] / &t[i][k];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = leave else { return Err(()) };
        pivot(t, basis, r, k);
    }
}
