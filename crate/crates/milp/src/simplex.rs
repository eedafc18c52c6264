//! Bounded-variable primal simplex on a dense explicit basis inverse.
//!
//! Every row `i` gets a logical variable `r_i = a_i·x` whose bounds are the
//! row bounds, so the system is `[A | −I]·(x, r) = 0` with every variable
//! boxed (possibly by infinite bounds). Phase 1 minimizes the sum of bound
//! violations of the basic variables starting from whatever basis is loaded,
//! which is what makes warm starts after bound changes work.
//!
//! The basis inverse is stored column-major and updated in product form; it
//! is rebuilt from scratch every [`REFACTOR_INTERVAL`] pivots. Only the
//! structural part of the basis is inverted on refactorization, since the
//! logical columns are signed unit vectors.

use crate::model::{MilpModel, Sense};

const REFACTOR_INTERVAL: usize = 100;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_AFTER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Column-oriented LP in `row_lower ≤ A·x ≤ row_upper`, `col_lower ≤ x ≤ col_upper`, minimize `cost·x`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub num_rows: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
}

impl LpProblem {
    /// Relaxes integrality. A maximization objective is negated so the problem
    /// is always a minimization; the returned sign converts back.
    pub fn from_model(model: &MilpModel) -> (Self, f64) {
        let n = model.num_vars();
        let mut cols = vec![Vec::new(); n];
        let mut row_lower = Vec::new();
        let mut row_upper = Vec::new();
        for (i, (_, c)) in model.constraints().enumerate() {
            for &(v, a) in &c.terms {
                cols[v.0].push((i, a));
            }
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            row_lower.push(lo);
            row_upper.push(hi);
        }
        let sign = match model.objective().sense {
            crate::model::ObjSense::Minimize => 1.0,
            crate::model::ObjSense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n];
        for &(v, c) in &model.objective().terms {
            cost[v.0] += sign * c;
        }
        let problem = LpProblem {
            num_rows: row_lower.len(),
            cols,
            cost,
            col_lower: model.variables().iter().map(|v| v.lower).collect(),
            col_upper: model.variables().iter().map(|v| v.upper).collect(),
            row_lower,
            row_upper,
        };
        (problem, sign)
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn is_finite(&self) -> bool {
        self.cost.iter().all(|c| c.is_finite())
            && self.cols.iter().flatten().all(|(_, a)| a.is_finite())
            && self.col_lower.iter().chain(&self.row_lower).all(|l| *l != f64::INFINITY && !l.is_nan())
            && self.col_upper.iter().chain(&self.row_upper).all(|u| *u != f64::NEG_INFINITY && !u.is_nan())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// A basis that can be reloaded into an engine built from the same problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    basis: Vec<usize>,
    states: Vec<State>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { feasibility_tol: 1e-7, optimality_tol: 1e-7, max_iterations: usize::MAX }
    }
}

pub struct Simplex {
    m: usize,
    n: usize,
    col_ptr: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost_scale: f64,
    opts: SimplexOptions,

    basis: Vec<usize>,
    state: Vec<State>,
    x: Vec<f64>,
    /// Column-major `m × m`; column `k` holds `B⁻¹ e_k` indexed by basis position.
    binv: Vec<f64>,
    updates: usize,
    fresh: bool,
    values_stale: bool,
    pub iterations: usize,
}

enum Step {
    Pivot { pos: usize, theta: f64, to_upper: bool },
    Flip { theta: f64 },
    Unbounded,
}

impl Simplex {
    pub fn new(problem: &LpProblem, opts: SimplexOptions) -> Self {
        let m = problem.num_rows;
        let n = problem.num_cols();
        let (row_scale, col_scale) = equilibrate(problem);

        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        col_ptr.push(0);
        for (j, col) in problem.cols.iter().enumerate() {
            let mut entries: Vec<(usize, f64)> = col.iter().copied().filter(|(_, a)| *a != 0.0).collect();
            entries.sort_by_key(|e| e.0);
            for (i, a) in entries {
                col_row.push(i);
                col_val.push(a * row_scale[i] * col_scale[j]);
            }
            col_ptr.push(col_row.len());
        }

        let mut cost = vec![0.0; n + m];
        for j in 0..n {
            cost[j] = problem.cost[j] * col_scale[j];
        }
        let cmax = cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let cost_scale = if cmax > 0.0 { pow2(1.0 / cmax) } else { 1.0 };
        for c in &mut cost {
            *c *= cost_scale;
        }

        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for j in 0..n {
            lower.push(problem.col_lower[j] / col_scale[j]);
            upper.push(problem.col_upper[j] / col_scale[j]);
        }
        for i in 0..m {
            lower.push(problem.row_lower[i] * row_scale[i]);
            upper.push(problem.row_upper[i] * row_scale[i]);
        }

        let mut state = Vec::with_capacity(n + m);
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            let s = nonbasic_state(lower[j], upper[j]);
            x[j] = nonbasic_value(s, lower[j], upper[j]);
            state.push(s);
        }
        let basis: Vec<usize> = (n..n + m).collect();
        for i in 0..m {
            state.push(State::Basic(i));
        }
        let mut binv = vec![0.0; m * m];
        for k in 0..m {
            binv[k * m + k] = -1.0;
        }
        let mut s = Self {
            m,
            n,
            col_ptr,
            col_row,
            col_val,
            cost,
            lower,
            upper,
            row_scale,
            col_scale,
            cost_scale,
            opts,
            basis,
            state,
            x,
            binv,
            updates: 0,
            fresh: true,
            values_stale: true,
            iterations: 0,
        };
        s.compute_basic_values();
        s
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// Sets bounds of structural column `j` in model units.
    pub fn set_col_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        let (lo, hi) = (lower / self.col_scale[j], upper / self.col_scale[j]);
        if self.lower[j] == lo && self.upper[j] == hi {
            return;
        }
        self.lower[j] = lo;
        self.upper[j] = hi;
        if !matches!(self.state[j], State::Basic(_)) {
            let s = match self.state[j] {
                State::Lower if lo.is_finite() => State::Lower,
                State::Upper if hi.is_finite() => State::Upper,
                _ => nonbasic_state(lo, hi),
            };
            self.state[j] = s;
            self.x[j] = nonbasic_value(s, lo, hi);
            self.values_stale = true;
        }
    }

    pub fn col_bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j] * self.col_scale[j], self.upper[j] * self.col_scale[j])
    }

    pub fn basis(&self) -> Basis {
        Basis { basis: self.basis.clone(), states: self.state.clone() }
    }

    /// Loads a basis produced by this engine (possibly under other bounds) and refactorizes.
    pub fn load_basis(&mut self, b: &Basis) {
        self.basis.clone_from(&b.basis);
        self.state.clone_from(&b.states);
        for j in 0..self.n + self.m {
            if !matches!(self.state[j], State::Basic(_)) {
                let (lo, hi) = (self.lower[j], self.upper[j]);
                let s = match self.state[j] {
                    State::Lower if lo.is_finite() => State::Lower,
                    State::Upper if hi.is_finite() => State::Upper,
                    _ => nonbasic_state(lo, hi),
                };
                self.state[j] = s;
                self.x[j] = nonbasic_value(s, lo, hi);
            }
        }
        self.refactor();
    }

    /// Structural values in model units.
    pub fn primal(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x[j] * self.col_scale[j]).collect()
    }

    /// Row activities `a_i·x` in model units.
    pub fn row_activity(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.x[self.n + i] / self.row_scale[i]).collect()
    }

    /// Objective `cost·x` in model units (minimization form).
    pub fn objective(&self) -> f64 {
        let mut obj = 0.0;
        for j in 0..self.n {
            obj += self.cost[j] * self.x[j];
        }
        obj / self.cost_scale
    }

    /// Row duals `y` and structural reduced costs `c − Aᵀy` in model units.
    pub fn duals(&self) -> (Vec<f64>, Vec<f64>) {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        let y = self.btran(&cb);
        let duals = (0..self.m).map(|i| y[i] * self.row_scale[i] / self.cost_scale).collect();
        let reduced = (0..self.n)
            .map(|j| self.reduced_cost(j, &y) / (self.col_scale[j] * self.cost_scale))
            .collect();
        (duals, reduced)
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.col_row[range.clone()].iter().copied().zip(self.col_val[range].iter().copied())
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cost[j] - self.column(j).map(|(i, a)| y[i] * a).sum::<f64>()
        } else {
            y[j - self.n]
        }
    }

    /// `yᵀ = c_Bᵀ B⁻¹`
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let nz: Vec<(usize, f64)> = cb.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect();
        let mut y = vec![0.0; m];
        if nz.is_empty() {
            return y;
        }
        for (k, yk) in y.iter_mut().enumerate() {
            let col = &self.binv[k * m..(k + 1) * m];
            *yk = nz.iter().map(|&(i, c)| c * col[i]).sum();
        }
        y
    }

    /// `α = B⁻¹ a_j`
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        if j < self.n {
            for (k, a) in self.column(j) {
                let col = &self.binv[k * m..(k + 1) * m];
                for (al, b) in alpha.iter_mut().zip(col) {
                    *al += a * b;
                }
            }
        } else {
            let k = j - self.n;
            for (al, b) in alpha.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                *al = -b;
            }
        }
        alpha
    }

    fn compute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + self.m {
            if matches!(self.state[j], State::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.n {
                for (i, a) in self.column(j) {
                    rhs[i] -= a * xj;
                }
            } else {
                rhs[j - self.n] += xj;
            }
        }
        let mut xb = vec![0.0; m];
        for (k, r) in rhs.iter().enumerate() {
            if *r == 0.0 {
                continue;
            }
            let col = &self.binv[k * m..(k + 1) * m];
            for (v, b) in xb.iter_mut().zip(col) {
                *v += r * b;
            }
        }
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[pos];
        }
        self.values_stale = false;
    }

    /// Rebuilds `B⁻¹`. Structurally dependent basic columns are swapped for logicals.
    fn refactor(&mut self) {
        let m = self.m;
        let n = self.n;
        loop {
            let mut covered = vec![false; m];
            let mut structural = Vec::new();
            for (pos, &j) in self.basis.iter().enumerate() {
                if j >= n {
                    covered[j - n] = true;
                } else {
                    structural.push(pos);
                }
            }
            let rows: Vec<usize> = (0..m).filter(|&r| !covered[r]).collect();
            let s = structural.len();
            debug_assert_eq!(rows.len(), s);
            let mut row_index = vec![usize::MAX; m];
            for (a, &r) in rows.iter().enumerate() {
                row_index[r] = a;
            }
            // K[a][b] = A[rows[a], basis[structural[b]]], row-major
            let mut kmat = vec![0.0; s * s];
            for (b, &pos) in structural.iter().enumerate() {
                for (i, v) in self.column(self.basis[pos]) {
                    let a = row_index[i];
                    if a != usize::MAX {
                        kmat[a * s + b] = v;
                    }
                }
            }
            match invert(&mut kmat, s) {
                Ok(kinv) => {
                    self.assemble_inverse(&structural, &rows, &row_index, &kinv);
                    break;
                }
                Err((dep_cols, free_rows)) => {
                    for (b, a) in dep_cols.into_iter().zip(free_rows) {
                        let pos = structural[b];
                        let leaving = self.basis[pos];
                        let entering = n + rows[a];
                        let st = nonbasic_state(self.lower[leaving], self.upper[leaving]);
                        self.state[leaving] = st;
                        self.x[leaving] = nonbasic_value(st, self.lower[leaving], self.upper[leaving]);
                        self.basis[pos] = entering;
                        self.state[entering] = State::Basic(pos);
                    }
                }
            }
        }
        self.updates = 0;
        self.fresh = true;
        self.compute_basic_values();
    }

    fn assemble_inverse(&mut self, structural: &[usize], rows: &[usize], row_index: &[usize], kinv: &[f64]) {
        let m = self.m;
        let n = self.n;
        let s = structural.len();
        // G[r][:] = A[r, S] · Kinv for covered rows r
        let mut g = vec![0.0; m * s];
        for (b, &pos) in structural.iter().enumerate() {
            let kin_row = &kinv[b * s..(b + 1) * s];
            for (i, v) in self.column(self.basis[pos]) {
                if row_index[i] == usize::MAX {
                    let gr = &mut g[i * s..(i + 1) * s];
                    for (gv, kv) in gr.iter_mut().zip(kin_row) {
                        *gv += v * kv;
                    }
                }
            }
        }
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        let logical_pos: Vec<(usize, usize)> = self
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &j)| j >= n)
            .map(|(pos, &j)| (pos, j - n))
            .collect();
        for (a, &k) in rows.iter().enumerate() {
            let col = &mut self.binv[k * m..(k + 1) * m];
            for (b, &pos) in structural.iter().enumerate() {
                col[pos] = kinv[b * s + a];
            }
            for &(pos, r) in &logical_pos {
                col[pos] = g[r * s + a];
            }
        }
        for &(pos, r) in &logical_pos {
            self.binv[r * m + pos] = -1.0;
        }
    }

    fn pivot_update(&mut self, alpha: &[f64], r: usize) {
        let m = self.m;
        let ar = alpha[r];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let v = col[r];
            if v == 0.0 {
                continue;
            }
            let p = v / ar;
            for (c, a) in col.iter_mut().zip(alpha) {
                *c -= a * p;
            }
            col[r] = p;
        }
        self.updates += 1;
    }

    fn infeasibility(&self, pos: usize) -> f64 {
        let j = self.basis[pos];
        let v = self.x[j];
        if v < self.lower[j] - self.opts.feasibility_tol {
            -1.0
        } else if v > self.upper[j] + self.opts.feasibility_tol {
            1.0
        } else {
            0.0
        }
    }

    pub fn solve(&mut self) -> LpStatus {
        if self.values_stale {
            self.compute_basic_values();
        }
        let mut degenerate_streak = 0usize;
        let mut bland = false;
        let mut iters = 0usize;
        loop {
            if iters >= self.opts.max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.updates >= REFACTOR_INTERVAL {
                self.refactor();
            }
            let phase_costs: Vec<f64> = (0..self.m).map(|p| self.infeasibility(p)).collect();
            let phase1 = phase_costs.iter().any(|c| *c != 0.0);
            let cb: Vec<f64> = if phase1 {
                phase_costs
            } else {
                self.basis.iter().map(|&j| self.cost[j]).collect()
            };
            let y = self.btran(&cb);
            let entering = self.price(&y, phase1, bland);
            let Some((q, dir)) = entering else {
                if !self.fresh {
                    self.refactor();
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };
            let alpha = self.ftran(q);
            let step = self.ratio_test(q, dir, &alpha, phase1, bland);
            iters += 1;
            self.iterations += 1;
            match step {
                Step::Unbounded => {
                    if !self.fresh {
                        self.refactor();
                        continue;
                    }
                    if phase1 {
                        return LpStatus::IterationLimit;
                    }
                    return LpStatus::Unbounded;
                }
                Step::Flip { theta } => {
                    self.advance(q, dir, theta, &alpha);
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                    degenerate_streak = 0;
                    bland = false;
                    self.fresh = false;
                }
                Step::Pivot { pos, theta, to_upper } => {
                    self.advance(q, dir, theta, &alpha);
                    let leaving = self.basis[pos];
                    self.state[leaving] = if to_upper { State::Upper } else { State::Lower };
                    self.x[leaving] = if to_upper { self.upper[leaving] } else { self.lower[leaving] };
                    self.basis[pos] = q;
                    self.state[q] = State::Basic(pos);
                    self.pivot_update(&alpha, pos);
                    self.fresh = false;
                    if theta.abs() < DEGENERATE_STEP {
                        degenerate_streak += 1;
                        if degenerate_streak >= BLAND_AFTER {
                            bland = true;
                        }
                    } else {
                        degenerate_streak = 0;
                        bland = false;
                    }
                }
            }
        }
    }

    fn advance(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for (pos, a) in alpha.iter().enumerate() {
            if *a != 0.0 {
                let j = self.basis[pos];
                self.x[j] -= dir * a * theta;
            }
        }
    }

    /// Dantzig pricing, or smallest eligible index under Bland's rule.
    fn price(&self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if matches!(st, State::Basic(_)) || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = if phase1 {
                if j < self.n {
                    -self.column(j).map(|(i, a)| y[i] * a).sum::<f64>()
                } else {
                    y[j - self.n]
                }
            } else {
                self.reduced_cost(j, y)
            };
            let dir = match st {
                State::Lower if d < -tol => 1.0,
                State::Upper if d > tol => -1.0,
                State::Zero if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], phase1: bool, bland: bool) -> Step {
        let tol = self.opts.feasibility_tol;
        // (pos, exact ratio, relaxed ratio, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (pos, &a) in alpha.iter().enumerate() {
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let j = self.basis[pos];
            let v = self.x[j];
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let rate = -dir * a;
            let below = v < lo - tol;
            let above = v > hi + tol;
            if phase1 && below {
                if rate > 0.0 {
                    cands.push((pos, (lo - v) / rate, (lo - v + tol) / rate, false));
                }
                continue;
            }
            if phase1 && above {
                if rate < 0.0 {
                    cands.push((pos, (v - hi) / -rate, (v - hi + tol) / -rate, true));
                }
                continue;
            }
            if rate > 0.0 && hi.is_finite() {
                cands.push((pos, ((hi - v) / rate).max(0.0), ((hi - v + tol) / rate).max(0.0), true));
            } else if rate < 0.0 && lo.is_finite() {
                cands.push((pos, ((v - lo) / -rate).max(0.0), ((v - lo + tol) / -rate).max(0.0), false));
            }
        }
        let flip = self.upper[q] - self.lower[q];
        let chosen = if bland {
            let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= min + DEGENERATE_STEP)
                .min_by_key(|c| self.basis[c.0])
                .copied()
        } else {
            let limit = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= limit)
                .fold(None::<(usize, f64, f64, bool)>, |best, c| match best {
                    Some(b) if alpha[b.0].abs() >= alpha[c.0].abs() => Some(b),
                    _ => Some(*c),
                })
        };
        match chosen {
            Some((pos, theta, _, to_upper)) => {
                if flip.is_finite() && flip <= theta {
                    Step::Flip { theta: flip }
                } else {
                    Step::Pivot { pos, theta, to_upper }
                }
            }
            None if flip.is_finite() => Step::Flip { theta: flip },
            None => Step::Unbounded,
        }
    }
}

fn nonbasic_state(lo: f64, hi: f64) -> State {
    if lo.is_finite() {
        State::Lower
    } else if hi.is_finite() {
        State::Upper
    } else {
        State::Zero
    }
}

fn nonbasic_value(s: State, lo: f64, hi: f64) -> f64 {
    match s {
        State::Lower => lo,
        State::Upper => hi,
        _ => 0.0,
    }
}

fn pow2(v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        return 1.0;
    }
    2f64.powi(v.log2().round() as i32)
}

/// Geometric-mean row/column scaling rounded to powers of two.
fn equilibrate(p: &LpProblem) -> (Vec<f64>, Vec<f64>) {
    let m = p.num_rows;
    let n = p.num_cols();
    let mut rs = vec![1.0; m];
    let mut cs = vec![1.0; n];
    for _ in 0..4 {
        let mut rmin = vec![f64::INFINITY; m];
        let mut rmax = vec![0.0f64; m];
        for (j, col) in p.cols.iter().enumerate() {
            for &(i, a) in col {
                let v = (a * cs[j]).abs();
                if v > 0.0 {
                    rmin[i] = rmin[i].min(v);
                    rmax[i] = rmax[i].max(v);
                }
            }
        }
        for i in 0..m {
            if rmax[i] > 0.0 {
                rs[i] = 1.0 / (rmin[i] * rmax[i]).sqrt();
            }
        }
        for (j, col) in p.cols.iter().enumerate() {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for &(i, a) in col {
                let v = (a * rs[i]).abs();
                if v > 0.0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if hi > 0.0 {
                cs[j] = 1.0 / (lo * hi).sqrt();
            }
        }
    }
    (rs.into_iter().map(pow2).collect(), cs.into_iter().map(pow2).collect())
}

/// Gauss-Jordan inversion of a row-major `s × s` matrix with partial pivoting.
/// On failure returns the dependent columns and the rows left without a pivot.
fn invert(mat: &mut [f64], s: usize) -> Result<Vec<f64>, (Vec<usize>, Vec<usize>)> {
    let mut inv = vec![0.0; s * s];
    for i in 0..s {
        inv[i * s + i] = 1.0;
    }
    // row_of_col[c] = row where column c was pivoted
    let mut pivot_row = vec![usize::MAX; s];
    let mut used = vec![false; s];
    let mut dependent = Vec::new();
    for c in 0..s {
        let mut best = usize::MAX;
        let mut best_val = 1e-11;
        for r in 0..s {
            if !used[r] {
                let v = mat[r * s + c].abs();
                if v > best_val {
                    best_val = v;
                    best = r;
                }
            }
        }
        if best == usize::MAX {
            dependent.push(c);
            continue;
        }
        used[best] = true;
        pivot_row[c] = best;
        let p = mat[best * s + c];
        for k in 0..s {
            mat[best * s + k] /= p;
            inv[best * s + k] /= p;
        }
        let (prow, pinv): (Vec<f64>, Vec<f64>) =
            (mat[best * s..(best + 1) * s].to_vec(), inv[best * s..(best + 1) * s].to_vec());
        for r in 0..s {
            if r == best {
                continue;
            }
            let f = mat[r * s + c];
            if f == 0.0 {
                continue;
            }
            for k in 0..s {
                mat[r * s + k] -= f * prow[k];
                inv[r * s + k] -= f * pinv[k];
            }
        }
    }
    if !dependent.is_empty() {
        let free_rows: Vec<usize> = (0..s).filter(|r| !used[*r]).collect();
        return Err((dependent, free_rows));
    }
    // row `pivot_row[c]` of `inv` is row `c` of the true inverse
    let mut out = vec![0.0; s * s];
    for c in 0..s {
        let r = pivot_row[c];
        out[c * s..(c + 1) * s].copy_from_slice(&inv[r * s..(r + 1) * s]);
    }
    Ok(out)
}
