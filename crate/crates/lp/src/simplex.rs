//! Bounded-variable revised simplex (primal and dual) on the computational
//! form `A x − s = 0`, where each row logical `s_i` carries the row bounds.
//!
//! Variables `0..n` are structural, `n..n+m` are row logicals with column
//! `−e_i`. The basis inverse is kept in product form and rebuilt every
//! `refactor_interval` updates.

use std::collections::VecDeque;

use crate::factor::EtaFile;
use crate::model::{ProgramModel, Sense};
use crate::solution::BasisStatus;

/// Tolerances and limits for the simplex engine.
#[derive(Clone, Debug)]
pub struct LpOptions {
    /// Primal feasibility tolerance on scaled rows and bounds.
    pub tol_feas: f64,
    /// Reduced-cost optimality tolerance.
    pub tol_opt: f64,
    /// Smallest pivot magnitude accepted in ratio tests.
    pub pivot_tol: f64,
    /// Iteration cap; 0 means `max(100_000, 50·(rows + columns))`.
    pub max_iterations: u64,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: u32,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            tol_feas: 1e-6,
            tol_opt: 1e-6,
            pivot_tol: 1e-9,
            max_iterations: 0,
            refactor_interval: 100,
            stall_limit: 50,
        }
    }
}

/// Bound relaxation used by the first pass of the Harris ratio test.
const HARRIS_TOL: f64 = 1e-9;
const MAX_NUMERIC_RETRIES: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericFailure,
    /// Dual simplex proved the objective exceeds the supplied cutoff.
    Cutoff,
}

/// Scaled, minimization-form copy of a model.
pub(crate) struct CompForm {
    pub m: usize,
    pub n: usize,
    col_start: Vec<usize>,
    col_row: Vec<u32>,
    col_val: Vec<f64>,
    pub cost: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub col_scale: Vec<f64>,
    pub row_scale: Vec<f64>,
    /// +1 for minimization, −1 for maximization.
    pub obj_sign: f64,
}

impl CompForm {
    pub fn new(model: &ProgramModel) -> Self {
        let n = model.num_vars();
        let m = model.num_constraints();
        let mut counts = vec![0usize; n + 1];
        for row in model.constraints() {
            for &(j, _) in &row.terms {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut col_row = vec![0u32; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = counts;
        for (i, row) in model.constraints().iter().enumerate() {
            for &(j, a) in &row.terms {
                col_row[fill[j]] = i as u32;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }
        let (row_scale, col_scale) = geometric_scaling(m, n, &col_start, &col_row, &col_val);
        for j in 0..n {
            for k in col_start[j]..col_start[j + 1] {
                col_val[k] *= row_scale[col_row[k] as usize] * col_scale[j];
            }
        }
        let obj_sign = match model.objective().sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n + m];
        for &(j, c) in &model.objective().terms {
            cost[j] = obj_sign * c * col_scale[j];
        }
        let mut lb = vec![0.0; n + m];
        let mut ub = vec![0.0; n + m];
        for (j, v) in model.vars().iter().enumerate() {
            lb[j] = v.lower / col_scale[j];
            ub[j] = v.upper / col_scale[j];
        }
        for (i, row) in model.constraints().iter().enumerate() {
            let (lo, hi) = row.activity_bounds();
            lb[n + i] = lo * row_scale[i];
            ub[n + i] = hi * row_scale[i];
        }
        CompForm { m, n, col_start, col_row, col_val, cost, lb, ub, col_scale, row_scale, obj_sign }
    }

    /// Scale factor converting an internal value of variable `j` back to model units.
    pub fn unscale(&self, j: usize) -> f64 {
        if j < self.n {
            self.col_scale[j]
        } else {
            1.0 / self.row_scale[j - self.n]
        }
    }

    fn nnz_in(&self, j: usize) -> usize {
        if j < self.n {
            self.col_start[j + 1] - self.col_start[j]
        } else {
            1
        }
    }
}

/// Geometric-mean equilibration rounded to powers of two so that scaling is exact.
fn geometric_scaling(
    m: usize,
    n: usize,
    col_start: &[usize],
    col_row: &[u32],
    col_val: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut r = vec![1.0f64; m];
    let mut c = vec![1.0f64; n];
    for _ in 0..4 {
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![0.0f64; m];
        for j in 0..n {
            for k in col_start[j]..col_start[j + 1] {
                let i = col_row[k] as usize;
                let v = col_val[k].abs() * r[i] * c[j];
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        for i in 0..m {
            if hi[i] > 0.0 {
                r[i] /= (lo[i] * hi[i]).sqrt();
            }
        }
        for j in 0..n {
            let (mut l, mut h) = (f64::INFINITY, 0.0f64);
            for k in col_start[j]..col_start[j + 1] {
                let v = col_val[k].abs() * r[col_row[k] as usize] * c[j];
                l = l.min(v);
                h = h.max(v);
            }
            if h > 0.0 {
                c[j] /= (l * h).sqrt();
            }
        }
    }
    let pow2 = |s: f64| if s.is_finite() && s > 0.0 { 2f64.powi(s.log2().round() as i32) } else { 1.0 };
    (r.into_iter().map(pow2).collect(), c.into_iter().map(pow2).collect())
}

enum Ratio {
    Unbounded,
    Flip(f64),
    Pivot { pos: usize, theta: f64, to_upper: bool },
}

enum DualOutcome {
    PrimalFeasible,
    Infeasible,
    Cutoff,
    IterationLimit,
    Numeric,
}

pub(crate) struct Engine<'a> {
    pub f: &'a CompForm,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub state: Vec<BasisStatus>,
    head: Vec<usize>,
    pub x: Vec<f64>,
    eta: EtaFile,
    factored: bool,
    etas_at_factor: usize,
    opts: LpOptions,
    pub iterations: u64,
    /// Iteration budget of a single `solve` call.
    max_iter: u64,
    stop_at: u64,
    y: Vec<f64>,
    work: Vec<f64>,
    alpha: Vec<f64>,
}

impl<'a> Engine<'a> {
    /// Engine positioned at the all-logical basis.
    pub fn new(f: &'a CompForm, opts: &LpOptions) -> Self {
        let (m, n) = (f.m, f.n);
        let max_iter = if opts.max_iterations == 0 {
            (50 * (m + n) as u64).max(100_000)
        } else {
            opts.max_iterations
        };
        let mut e = Engine {
            f,
            lb: f.lb.clone(),
            ub: f.ub.clone(),
            state: vec![BasisStatus::Lower; n + m],
            head: vec![0; m],
            x: vec![0.0; n + m],
            eta: EtaFile::default(),
            factored: false,
            etas_at_factor: 0,
            opts: opts.clone(),
            iterations: 0,
            max_iter,
            stop_at: max_iter,
            y: vec![0.0; m],
            work: vec![0.0; m],
            alpha: vec![0.0; m],
        };
        for j in 0..n {
            e.state[j] = e.default_nonbasic(j);
        }
        for i in 0..m {
            e.state[n + i] = BasisStatus::Basic;
        }
        e
    }

    fn default_nonbasic(&self, j: usize) -> BasisStatus {
        if self.lb[j].is_finite() {
            BasisStatus::Lower
        } else if self.ub[j].is_finite() {
            BasisStatus::Upper
        } else {
            BasisStatus::Zero
        }
    }

    /// Installs a starting basis. Inconsistent entries are repaired during
    /// the next factorization.
    pub fn set_basis(&mut self, states: &[BasisStatus]) {
        for (j, &s) in states.iter().enumerate() {
            self.state[j] = match s {
                BasisStatus::Basic => BasisStatus::Basic,
                BasisStatus::Lower if self.lb[j].is_finite() => BasisStatus::Lower,
                BasisStatus::Upper if self.ub[j].is_finite() => BasisStatus::Upper,
                _ => self.default_nonbasic(j),
            };
        }
        self.factored = false;
    }

    pub fn basis_states(&self) -> &[BasisStatus] {
        &self.state
    }

    /// Sets working bounds of a variable in internal units.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lb[j] = lo;
        self.ub[j] = hi;
        if self.state[j] != BasisStatus::Basic {
            let s = self.state[j];
            self.state[j] = match s {
                BasisStatus::Lower if lo.is_finite() => s,
                BasisStatus::Upper if hi.is_finite() => s,
                _ => self.default_nonbasic(j),
            };
        }
    }

    /// Internal-form objective `Σ cost·x` (minimization sense, scaled).
    pub fn objective(&self) -> f64 {
        (0..self.f.n).map(|j| self.f.cost[j] * self.x[j]).sum()
    }

    /// Row duals `y` in internal units for the current basis.
    pub fn duals(&mut self) -> Vec<f64> {
        self.compute_duals(false);
        self.y.clone()
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            BasisStatus::Lower => self.lb[j],
            BasisStatus::Upper => self.ub[j],
            _ => 0.0,
        }
    }

    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        let f = self.f;
        if j < f.n {
            let mut s = 0.0;
            for k in f.col_start[j]..f.col_start[j + 1] {
                s += f.col_val[k] * v[f.col_row[k] as usize];
            }
            s
        } else {
            -v[j - f.n]
        }
    }

    fn load_column(&self, j: usize, out: &mut [f64]) {
        out.fill(0.0);
        let f = self.f;
        if j < f.n {
            for k in f.col_start[j]..f.col_start[j + 1] {
                out[f.col_row[k] as usize] = f.col_val[k];
            }
        } else {
            out[j - f.n] = -1.0;
        }
    }

    /// Rebuilds the product-form inverse from the variables marked basic.
    /// Columns that cannot be pivoted are made nonbasic; uncovered rows get
    /// their logical.
    fn reinvert(&mut self) {
        let (m, n) = (self.f.m, self.f.n);
        self.eta.clear();
        let mut head = vec![usize::MAX; m];
        let mut taken = vec![false; m];
        let mut structurals = Vec::new();
        for j in 0..n + m {
            if self.state[j] != BasisStatus::Basic {
                continue;
            }
            if j >= n {
                let i = j - n;
                head[i] = j;
                taken[i] = true;
                self.eta.push_diagonal(i, -1.0);
            } else {
                structurals.push(j);
            }
        }

        // Column singletons with respect to the rows still free.
        let f = self.f;
        let mut count = vec![0usize; structurals.len()];
        let mut row_cands: Vec<Vec<u32>> = vec![Vec::new(); m];
        for (k, &j) in structurals.iter().enumerate() {
            for t in f.col_start[j]..f.col_start[j + 1] {
                let i = f.col_row[t] as usize;
                if !taken[i] {
                    count[k] += 1;
                    row_cands[i].push(k as u32);
                }
            }
        }
        let mut done = vec![false; structurals.len()];
        let mut queue: VecDeque<usize> = (0..structurals.len()).filter(|&k| count[k] == 1).collect();
        let mut col = vec![0.0; m];
        while let Some(k) = queue.pop_front() {
            if done[k] || count[k] != 1 {
                continue;
            }
            let j = structurals[k];
            let i = (f.col_start[j]..f.col_start[j + 1])
                .map(|t| f.col_row[t] as usize)
                .find(|&i| !taken[i])
                .expect("singleton row");
            self.load_column(j, &mut col);
            self.eta.ftran(&mut col);
            if col[i].abs() < self.opts.pivot_tol {
                continue;
            }
            self.eta.push_dense(i, &col);
            head[i] = j;
            taken[i] = true;
            done[k] = true;
            for &k2 in &row_cands[i] {
                let k2 = k2 as usize;
                if !done[k2] {
                    count[k2] -= 1;
                    if count[k2] == 1 {
                        queue.push_back(k2);
                    }
                }
            }
        }

        // Remaining columns: partial pivoting on the free rows.
        let mut bump: Vec<usize> = (0..structurals.len()).filter(|&k| !done[k]).collect();
        bump.sort_by_key(|&k| (f.nnz_in(structurals[k]), structurals[k]));
        for k in bump {
            let j = structurals[k];
            self.load_column(j, &mut col);
            self.eta.ftran(&mut col);
            let mut best = None;
            let mut best_abs = self.opts.pivot_tol;
            for i in 0..m {
                if !taken[i] && col[i].abs() > best_abs {
                    best_abs = col[i].abs();
                    best = Some(i);
                }
            }
            match best {
                Some(i) => {
                    self.eta.push_dense(i, &col);
                    head[i] = j;
                    taken[i] = true;
                }
                None => {
                    self.state[j] = self.default_nonbasic(j);
                }
            }
        }
        for i in 0..m {
            if !taken[i] {
                let j = n + i;
                self.state[j] = BasisStatus::Basic;
                head[i] = j;
                self.eta.push_diagonal(i, -1.0);
            }
        }
        self.head = head;
        self.factored = true;
        self.etas_at_factor = self.eta.len();
    }

    /// Sets nonbasic values from their bounds and solves for the basics.
    fn compute_xb(&mut self) {
        let (m, n) = (self.f.m, self.f.n);
        let mut rhs = vec![0.0; m];
        for j in 0..n + m {
            if self.state[j] == BasisStatus::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v == 0.0 {
                continue;
            }
            if j < n {
                let f = self.f;
                for k in f.col_start[j]..f.col_start[j + 1] {
                    rhs[f.col_row[k] as usize] -= f.col_val[k] * v;
                }
            } else {
                rhs[j - n] += v;
            }
        }
        self.eta.ftran(&mut rhs);
        for p in 0..m {
            self.x[self.head[p]] = rhs[p];
        }
    }

    fn refresh(&mut self) {
        self.reinvert();
        self.compute_xb();
    }

    /// −1 below lower bound, +1 above upper bound, 0 feasible.
    fn infeasibility(&self, j: usize) -> i8 {
        let tol = self.opts.tol_feas;
        if self.x[j] < self.lb[j] - tol {
            -1
        } else if self.x[j] > self.ub[j] + tol {
            1
        } else {
            0
        }
    }

    fn primal_feasible(&self) -> bool {
        self.head.iter().all(|&j| self.infeasibility(j) == 0)
    }

    /// Fills `self.y`; phase-1 costs penalize current infeasibilities.
    /// Returns whether any basic variable is infeasible.
    fn compute_duals(&mut self, phase1_allowed: bool) -> bool {
        let m = self.f.m;
        let mut phase1 = false;
        if phase1_allowed {
            for p in 0..m {
                let s = self.infeasibility(self.head[p]);
                self.work[p] = s as f64;
                phase1 |= s != 0;
            }
        }
        if !phase1 {
            for p in 0..m {
                self.work[p] = self.f.cost[self.head[p]];
            }
        }
        self.y.copy_from_slice(&self.work);
        self.eta.btran(&mut self.y);
        phase1
    }

    fn needs_refactor(&self) -> bool {
        !self.factored || self.eta.len() - self.etas_at_factor >= self.opts.refactor_interval
    }

    /// Runs the simplex method from the installed basis.
    pub fn solve(&mut self, cutoff: f64) -> LpStatus {
        // `iterations` accumulates across warm re-solves; the budget does not.
        self.stop_at = self.iterations.saturating_add(self.max_iter);
        if !self.factored {
            self.reinvert();
        }
        self.compute_xb();
        if !self.primal_feasible() && self.make_dual_feasible() {
            match self.dual(cutoff) {
                DualOutcome::PrimalFeasible | DualOutcome::Numeric => {}
                DualOutcome::Infeasible => return LpStatus::Infeasible,
                DualOutcome::Cutoff => return LpStatus::Cutoff,
                DualOutcome::IterationLimit => return LpStatus::IterationLimit,
            }
        }
        self.primal()
    }

    /// Flips boxed nonbasics with wrong-signed reduced costs. Returns false,
    /// leaving the basis untouched, if some non-boxed variable is dual infeasible.
    fn make_dual_feasible(&mut self) -> bool {
        self.compute_duals(false);
        let tol = self.opts.tol_opt;
        let mut flips = Vec::new();
        for j in 0..self.f.n + self.f.m {
            let s = self.state[j];
            if s == BasisStatus::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.f.cost[j] - self.col_dot(j, &self.y);
            let wrong = match s {
                BasisStatus::Lower => d < -tol,
                BasisStatus::Upper => d > tol,
                _ => d.abs() > tol,
            };
            if !wrong {
                continue;
            }
            if !(self.lb[j].is_finite() && self.ub[j].is_finite()) {
                return false;
            }
            flips.push(j);
        }
        for &j in &flips {
            self.state[j] = if self.state[j] == BasisStatus::Lower { BasisStatus::Upper } else { BasisStatus::Lower };
        }
        if !flips.is_empty() {
            self.compute_xb();
        }
        true
    }

    fn primal(&mut self) -> LpStatus {
        let (m, n) = (self.f.m, self.f.n);
        let tol_d = self.opts.tol_opt;
        let mut degenerate_run = 0u32;
        let mut verified = 0u32;
        let mut numeric = 0u32;
        loop {
            if self.iterations >= self.stop_at {
                return LpStatus::IterationLimit;
            }
            if self.needs_refactor() {
                self.refresh();
            }
            let bland = degenerate_run > self.opts.stall_limit;
            let phase1 = self.compute_duals(true);

            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..n + m {
                let s = self.state[j];
                if s == BasisStatus::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.f.cost[j] };
                let d = c - self.col_dot(j, &self.y);
                let eligible = match s {
                    BasisStatus::Lower => d < -tol_d,
                    BasisStatus::Upper => d > tol_d,
                    _ => d.abs() > tol_d,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, d));
                }
            }

            let Some((q, dq)) = entering else {
                // Confirm the verdict on a fresh factorization.
                if self.eta.len() > self.etas_at_factor && verified < 3 {
                    verified += 1;
                    self.factored = false;
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let mut alpha = std::mem::take(&mut self.alpha);
            self.load_column(q, &mut alpha);
            self.eta.ftran(&mut alpha);
            let ratio = self.ratio_test(q, dir, &alpha, phase1, bland);
            let progress = match ratio {
                Ratio::Unbounded => {
                    self.alpha = alpha;
                    if phase1 || numeric < MAX_NUMERIC_RETRIES && self.eta.len() > self.etas_at_factor {
                        numeric += 1;
                        if numeric > MAX_NUMERIC_RETRIES {
                            return LpStatus::NumericFailure;
                        }
                        self.factored = false;
                        continue;
                    }
                    return LpStatus::Unbounded;
                }
                Ratio::Flip(range) => {
                    let step = dir * range;
                    self.apply_step(q, step, &alpha);
                    self.state[q] = if dir > 0.0 { BasisStatus::Upper } else { BasisStatus::Lower };
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                    range * dq.abs()
                }
                Ratio::Pivot { pos, theta, to_upper } => {
                    self.apply_step(q, dir * theta, &alpha);
                    self.pivot(pos, q, to_upper, &alpha);
                    theta * dq.abs()
                }
            };
            self.alpha = alpha;
            self.iterations += 1;
            if progress > 1e-11 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }
        }
    }

    fn apply_step(&mut self, q: usize, step: f64, alpha: &[f64]) {
        self.x[q] += step;
        for (p, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                self.x[self.head[p]] -= step * a;
            }
        }
    }

    fn pivot(&mut self, pos: usize, q: usize, to_upper: bool, alpha: &[f64]) {
        let leaving = self.head[pos];
        if to_upper && self.lb[leaving] != self.ub[leaving] {
            self.state[leaving] = BasisStatus::Upper;
            self.x[leaving] = self.ub[leaving];
        } else {
            self.state[leaving] = BasisStatus::Lower;
            self.x[leaving] = if to_upper { self.ub[leaving] } else { self.lb[leaving] };
        }
        self.eta.push_dense(pos, alpha);
        self.head[pos] = q;
        self.state[q] = BasisStatus::Basic;
    }

    /// Ratio bound for basic position `p` moving at `rate` per unit step:
    /// (exact ratio, relaxed ratio, leaves at upper).
    fn bound_ratio(&self, p: usize, rate: f64, phase1: bool) -> Option<(f64, f64, bool)> {
        let j = self.head[p];
        let (x, lo, hi) = (self.x[j], self.lb[j], self.ub[j]);
        let tol = self.opts.tol_feas;
        if phase1 && x < lo - tol {
            return (rate > 0.0).then(|| {
                let r = (lo - x) / rate;
                (r, r, false)
            });
        }
        if phase1 && x > hi + tol {
            return (rate < 0.0).then(|| {
                let r = (x - hi) / -rate;
                (r, r, true)
            });
        }
        if rate < 0.0 && lo.is_finite() {
            Some(((x - lo) / -rate, (x - lo + HARRIS_TOL) / -rate, false))
        } else if rate > 0.0 && hi.is_finite() {
            Some(((hi - x) / rate, (hi + HARRIS_TOL - x) / rate, true))
        } else {
            None
        }
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], phase1: bool, bland: bool) -> Ratio {
        let piv = self.opts.pivot_tol;
        let own = if self.lb[q].is_finite() && self.ub[q].is_finite() {
            self.ub[q] - self.lb[q]
        } else {
            f64::INFINITY
        };
        let mut relaxed = f64::INFINITY;
        let mut exact_min = f64::INFINITY;
        let mut bland_pick: Option<(usize, f64, bool)> = None;
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() < piv {
                continue;
            }
            if let Some((r, h, up)) = self.bound_ratio(p, -dir * a, phase1) {
                relaxed = relaxed.min(h);
                if bland {
                    let better = match bland_pick {
                        None => true,
                        Some((bp, br, _)) => {
                            r < br - 1e-12 || (r <= br + 1e-12 && self.head[p] < self.head[bp])
                        }
                    };
                    if better {
                        bland_pick = Some((p, r, up));
                    }
                    exact_min = exact_min.min(r);
                }
            }
        }
        if bland {
            return match bland_pick {
                Some((_, r, _)) if own <= r => Ratio::Flip(own),
                Some((pos, r, up)) => Ratio::Pivot { pos, theta: r.max(0.0), to_upper: up },
                None if own.is_finite() => Ratio::Flip(own),
                None => Ratio::Unbounded,
            };
        }
        if relaxed == f64::INFINITY {
            return if own.is_finite() { Ratio::Flip(own) } else { Ratio::Unbounded };
        }
        let mut pick: Option<(usize, f64, bool)> = None;
        let mut best_abs = 0.0;
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() < piv || a.abs() <= best_abs {
                continue;
            }
            if let Some((r, _, up)) = self.bound_ratio(p, -dir * a, phase1) {
                if r <= relaxed {
                    best_abs = a.abs();
                    pick = Some((p, r, up));
                }
            }
        }
        let (pos, r, up) = pick.expect("harris pass two finds a candidate");
        let theta = r.max(0.0);
        if own <= theta {
            Ratio::Flip(own)
        } else {
            Ratio::Pivot { pos, theta, to_upper: up }
        }
    }

    fn dual(&mut self, cutoff: f64) -> DualOutcome {
        let (m, n) = (self.f.m, self.f.n);
        let tol_p = self.opts.tol_feas;
        let tol_d = self.opts.tol_opt;
        let piv = self.opts.pivot_tol;
        let mut numeric = 0u32;
        let mut rho = vec![0.0; m];
        let mut cands: Vec<(usize, f64, f64)> = Vec::new();
        loop {
            if self.iterations >= self.stop_at {
                return DualOutcome::IterationLimit;
            }
            if self.needs_refactor() {
                self.refresh();
            }
            let mut leave = None;
            let mut worst = tol_p;
            for p in 0..m {
                let j = self.head[p];
                let v = (self.lb[j] - self.x[j]).max(self.x[j] - self.ub[j]);
                if v > worst {
                    worst = v;
                    leave = Some(p);
                }
            }
            let Some(r) = leave else {
                return DualOutcome::PrimalFeasible;
            };
            let jr = self.head[r];
            let below = self.x[jr] < self.lb[jr];
            let target = if below { self.lb[jr] } else { self.ub[jr] };
            let s = if below { 1.0 } else { -1.0 };

            self.compute_duals(false);
            rho.fill(0.0);
            rho[r] = 1.0;
            self.eta.btran(&mut rho);

            cands.clear();
            let mut bound = f64::INFINITY;
            for j in 0..n + m {
                let st = self.state[j];
                if st == BasisStatus::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let arj = self.col_dot(j, &rho);
                let sa = s * arj;
                let eligible = match st {
                    BasisStatus::Lower => sa < -piv,
                    BasisStatus::Upper => sa > piv,
                    _ => sa.abs() > piv,
                };
                if !eligible {
                    continue;
                }
                let d = self.f.cost[j] - self.col_dot(j, &self.y);
                let slack = match st {
                    BasisStatus::Lower => d.max(0.0),
                    BasisStatus::Upper => (-d).max(0.0),
                    _ => d.abs(),
                };
                bound = bound.min((slack + tol_d) / arj.abs());
                cands.push((j, slack / arj.abs(), arj));
            }
            if cands.is_empty() {
                return DualOutcome::Infeasible;
            }
            let mut pick = None;
            let mut best_abs = 0.0;
            for &(j, t, arj) in &cands {
                if t <= bound && arj.abs() > best_abs {
                    best_abs = arj.abs();
                    pick = Some((j, arj));
                }
            }
            let (q, arq) = pick.expect("dual harris pass two finds a candidate");
            let mut alpha = std::mem::take(&mut self.alpha);
            self.load_column(q, &mut alpha);
            self.eta.ftran(&mut alpha);
            if (alpha[r] - arq).abs() > 1e-7 * (1.0 + arq.abs()) || alpha[r].abs() < piv {
                self.alpha = alpha;
                numeric += 1;
                if numeric > MAX_NUMERIC_RETRIES {
                    return DualOutcome::Numeric;
                }
                self.refresh();
                continue;
            }
            let delta = (self.x[jr] - target) / alpha[r];
            self.apply_step(q, delta, &alpha);
            self.pivot(r, q, !below, &alpha);
            self.alpha = alpha;
            self.iterations += 1;
            if cutoff.is_finite() && self.objective() > cutoff {
                return DualOutcome::Cutoff;
            }
        }
    }
}
