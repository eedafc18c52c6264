//! Best-bound branch-and-bound over the simplex LP relaxation.

use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::model::MilpModel;
use crate::simplex::{Basis, LpProblem, LpStatus, Simplex, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub relative_gap: f64,
    pub node_limit: usize,
    pub time_limit_seconds: Option<f64>,
    pub branching: Branching,
    pub seed: u64,
    /// Recorded in results; the search itself is single-threaded.
    pub workers: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            relative_gap: 1e-6,
            node_limit: 1_000_000,
            time_limit_seconds: None,
            branching: Branching::MostFractional,
            seed: 0,
            workers: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.feasibility_tol > 0.0 && self.integrality_tol > 0.0) {
            return Err(SolveError::Config("tolerances must be positive".into()));
        }
        if !(self.relative_gap >= 0.0) {
            return Err(SolveError::Config("relative gap must be nonnegative".into()));
        }
        if self.workers == 0 {
            return Err(SolveError::Config("at least one worker is required".into()));
        }
        Ok(())
    }

    fn simplex_options(&self) -> SimplexOptions {
        SimplexOptions {
            feasibility_tol: self.feasibility_tol,
            optimality_tol: self.feasibility_tol,
            max_iterations: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

/// Result of an LP solve with integrality relaxed.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// One dual per live constraint, in model order.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Result of a MILP solve.
#[derive(Debug, Clone, Serialize)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Objective of the incumbent in the model's own sense; NaN without one.
    pub objective: f64,
    /// Best proven bound in the model's own sense.
    pub best_bound: f64,
    pub values: Vec<f64>,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub workers: usize,
    /// Global bound (minimization form) after every processed node.
    #[serde(skip)]
    pub bound_trace: Vec<f64>,
}

fn lp_status(s: LpStatus) -> SolveStatus {
    match s {
        LpStatus::Optimal => SolveStatus::Optimal,
        LpStatus::Infeasible => SolveStatus::Infeasible,
        LpStatus::Unbounded => SolveStatus::Unbounded,
        LpStatus::IterationLimit => SolveStatus::IterationLimit,
    }
}

fn check_finite(problem: &LpProblem) -> Result<(), SolveError> {
    if problem.is_finite() {
        Ok(())
    } else {
        Err(SolveError::NonFinite("coefficients must be finite and bounds consistent".into()))
    }
}

/// Solves the continuous relaxation of `model`.
pub fn solve_lp(model: &MilpModel, config: &SolverConfig) -> Result<LpSolution, SolveError> {
    config.validate()?;
    let (problem, sign) = LpProblem::from_model(model);
    check_finite(&problem)?;
    let mut engine = Simplex::new(&problem, config.simplex_options());
    let status = lp_status(engine.solve());
    let (duals, reduced) = engine.duals();
    Ok(LpSolution {
        status,
        objective: sign * engine.objective() + model.objective().constant,
        values: engine.primal(),
        duals: duals.into_iter().map(|y| sign * y).collect(),
        reduced_costs: reduced.into_iter().map(|d| sign * d).collect(),
        iterations: engine.iterations,
    })
}

struct Node {
    /// Bounds of the integer columns, aligned with `int_cols`.
    bounds: Vec<(f64, f64)>,
    bound: f64,
    seq: u64,
    warm: Rc<(u64, Basis)>,
    branched: Option<(usize, f64, bool)>,
}

#[derive(Default, Clone, Copy)]
struct Pseudo {
    down_sum: f64,
    down_n: u32,
    up_sum: f64,
    up_n: u32,
}

/// Branch-and-bound over binaries and bounded integers.
///
/// Node selection is best-bound; nodes whose bounds agree to within a relative
/// 1e-9 are treated as tied and the most recently created one wins, which
/// turns the search into a dive whenever branching leaves the bound unchanged.
pub fn solve_milp(model: &MilpModel, config: &SolverConfig) -> Result<MilpSolution, SolveError> {
    config.validate()?;
    for v in model.variables() {
        if v.kind.is_integral() && !(v.lower.is_finite() && v.upper.is_finite()) {
            return Err(SolveError::UnboundedInteger(v.name.clone()));
        }
    }
    let (problem, sign) = LpProblem::from_model(model);
    check_finite(&problem)?;
    let constant = model.objective().constant;
    let int_cols: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind.is_integral())
        .map(|(j, _)| j)
        .collect();
    let root_bounds: Vec<(f64, f64)> = int_cols
        .iter()
        .map(|&j| {
            let v = &model.variables()[j];
            (v.lower.ceil(), v.upper.floor())
        })
        .collect();
    let priorities: Vec<i32> = int_cols.iter().map(|&j| model.variables()[j].priority).collect();
    let to_model = |internal: f64| sign * internal + constant;

    let start = Instant::now();
    let mut engine = Simplex::new(&problem, config.simplex_options());
    let mut open: Vec<Node> = Vec::new();
    let mut seq = 0u64;
    let mut basis_ids = 0u64;
    let mut current_basis = 0u64;
    open.push(Node {
        bounds: root_bounds,
        bound: f64::NEG_INFINITY,
        seq,
        warm: Rc::new((0, engine.basis())),
        branched: None,
    });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut trace = Vec::new();
    let mut pseudo = vec![Pseudo::default(); int_cols.len()];
    let mut hit_limit = false;
    let mut root_unbounded = false;

    let prune_tol = |inc: f64| (config.relative_gap * inc.abs()).max(1e-9);

    while !open.is_empty() {
        if let Some((inc, _)) = &incumbent {
            let cutoff = inc - prune_tol(*inc);
            open.retain(|n| n.bound < cutoff);
            if open.is_empty() {
                break;
            }
        }
        if nodes >= config.node_limit
            || config.time_limit_seconds.is_some_and(|t| start.elapsed().as_secs_f64() >= t)
        {
            hit_limit = true;
            break;
        }
        let min_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        let tie = if min_bound.is_finite() { 1e-9 * min_bound.abs().max(1.0) } else { 0.0 };
        let pick = open
            .iter()
            .enumerate()
            .filter(|(_, n)| n.bound <= min_bound + tie)
            .max_by_key(|(_, n)| n.seq)
            .map(|(i, _)| i)
            .expect("nonempty");
        let node = open.swap_remove(pick);
        nodes += 1;

        for (k, &j) in int_cols.iter().enumerate() {
            engine.set_col_bounds(j, node.bounds[k].0, node.bounds[k].1);
        }
        if current_basis != node.warm.0 {
            engine.load_basis(&node.warm.1);
        }
        let status = engine.solve();
        basis_ids += 1;
        current_basis = basis_ids;

        let global = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        match status {
            LpStatus::Infeasible => {
                trace.push(global.min(node.bound).max(trace.last().copied().unwrap_or(f64::NEG_INFINITY)));
                continue;
            }
            LpStatus::Unbounded => {
                if nodes == 1 {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
            LpStatus::IterationLimit => {
                hit_limit = true;
                break;
            }
            LpStatus::Optimal => {}
        }
        let lp_obj = engine.objective().max(node.bound);
        let x = engine.primal();

        if let Some((var_k, frac_before, up)) = node.branched {
            let gain = (lp_obj - node.bound).max(0.0);
            if node.bound.is_finite() {
                let p = &mut pseudo[var_k];
                if up {
                    p.up_sum += gain / (1.0 - frac_before).max(1e-6);
                    p.up_n += 1;
                } else {
                    p.down_sum += gain / frac_before.max(1e-6);
                    p.down_n += 1;
                }
            }
        }

        if let Some((inc, _)) = &incumbent {
            if lp_obj >= inc - prune_tol(*inc) {
                trace.push(global.min(*inc).max(trace.last().copied().unwrap_or(f64::NEG_INFINITY)));
                continue;
            }
        }

        let branch_var = select_branch(&int_cols, &priorities, &x, config, &pseudo);
        match branch_var {
            None => {
                let mut sol = x;
                for &j in &int_cols {
                    sol[j] = sol[j].round();
                }
                incumbent = Some((lp_obj, sol));
            }
            Some(k) => {
                let j = int_cols[k];
                let v = x[j];
                let frac = v - v.floor();
                let warm = Rc::new((current_basis, engine.basis()));
                let mut down = node.bounds.clone();
                down[k].1 = v.floor();
                let mut up = node.bounds;
                up[k].0 = v.ceil();
                seq += 1;
                open.push(Node { bounds: down, bound: lp_obj, seq, warm: warm.clone(), branched: Some((k, frac, false)) });
                seq += 1;
                open.push(Node { bounds: up, bound: lp_obj, seq, warm, branched: Some((k, frac, true)) });
            }
        }
        let mut g = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        if let Some((inc, _)) = &incumbent {
            g = g.min(*inc);
        }
        trace.push(g.max(trace.last().copied().unwrap_or(f64::NEG_INFINITY)));
    }

    let open_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let (status, objective, best_bound, values) = if root_unbounded {
        (SolveStatus::Unbounded, f64::NAN, f64::NAN, vec![f64::NAN; model.num_vars()])
    } else {
        match incumbent {
            Some((inc, values)) => {
                let bound = open_bound.min(inc);
                let status = if hit_limit && inc - bound > prune_tol(inc) {
                    SolveStatus::Feasible
                } else {
                    SolveStatus::Optimal
                };
                (status, to_model(inc), to_model(bound), values)
            }
            None if hit_limit => {
                (SolveStatus::IterationLimit, f64::NAN, to_model(open_bound), vec![f64::NAN; model.num_vars()])
            }
            None => (SolveStatus::Infeasible, f64::NAN, f64::NAN, vec![f64::NAN; model.num_vars()]),
        }
    };
    Ok(MilpSolution {
        status,
        objective,
        best_bound,
        values,
        nodes,
        lp_iterations: engine.iterations,
        workers: config.workers,
        bound_trace: trace,
    })
}

fn select_branch(
    int_cols: &[usize],
    priorities: &[i32],
    x: &[f64],
    config: &SolverConfig,
    pseudo: &[Pseudo],
) -> Option<usize> {
    let mut fractional: Vec<(usize, f64)> = int_cols
        .iter()
        .enumerate()
        .filter_map(|(k, &j)| {
            let f = x[j] - x[j].floor();
            (f > config.integrality_tol && f < 1.0 - config.integrality_tol).then_some((k, f))
        })
        .collect();
    let top = fractional.iter().map(|&(k, _)| priorities[k]).max()?;
    fractional.retain(|&(k, _)| priorities[k] == top);
    let most_fractional = || {
        let mut best = fractional[0];
        for &(k, f) in &fractional[1..] {
            if f.min(1.0 - f) > best.1.min(1.0 - best.1) + 1e-12 {
                best = (k, f);
            }
        }
        best.0
    };
    match config.branching {
        Branching::MostFractional => Some(most_fractional()),
        Branching::PseudoCost => {
            let mut best: Option<(usize, f64)> = None;
            for &(k, f) in &fractional {
                let p = pseudo[k];
                if p.down_n == 0 || p.up_n == 0 {
                    continue;
                }
                let down = (p.down_sum / p.down_n as f64) * f;
                let up = (p.up_sum / p.up_n as f64) * (1.0 - f);
                let score = down.max(1e-6) * up.max(1e-6);
                if best.is_none_or(|b| score > b.1 + 1e-12) {
                    best = Some((k, score));
                }
            }
            Some(best.map_or_else(most_fractional, |b| b.0))
        }
    }
}
