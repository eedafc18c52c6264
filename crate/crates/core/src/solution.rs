//! Planning solutions and the build-solve-extract pipeline.

use nexus_milp::{solve_milp, MilpSolution, SolveError, SolveStatus, SolverConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::{build, BuildArtifacts, BuildError};
use crate::instance::{NexusInstance, SolveMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub technology: Vec<NamedValue>,
    pub storage: Vec<NamedValue>,
    pub ro_investment: f64,
    pub ro_operation: f64,
    pub tank: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.technology.iter().chain(&self.storage).map(|c| c.value).sum::<f64>() + self.ro_investment + self.ro_operation + self.tank
    }
}

/// Per-storage trajectories; `soc` has one more entry than the grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StorageTrace {
    pub name: String,
    pub capacity: f64,
    pub soc: Vec<f64>,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
}

/// Per-step trajectories. RO quantities are expanded to every step even when
/// a single operating point was optimized.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolutionSeries {
    pub power: Vec<f64>,
    pub ec: Vec<f64>,
    pub qf: Vec<f64>,
    pub qp: Vec<f64>,
    pub wr1: Vec<f64>,
    pub wr2: Vec<f64>,
    pub wr3: Vec<f64>,
    pub wr_sys: Vec<f64>,
    pub q_stor: Vec<f64>,
    pub q_rel: Vec<f64>,
    /// Tank level with V(0) first.
    pub tank_level: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub best_bound: f64,
    pub workers: usize,
    pub seed: u64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub mode: SolveMode,
    /// Annualized total cost [$/yr]; infinite when no solution exists.
    pub objective: f64,
    pub unit_counts: Vec<NamedValue>,
    pub storage: Vec<StorageTrace>,
    pub tank_volume: f64,
    pub qp_capacity: f64,
    /// P^Sum over the horizon [kWh].
    pub energy_sum: f64,
    pub land_use: f64,
    pub water_use: f64,
    pub series: SolutionSeries,
    pub costs: CostBreakdown,
    pub stats: SolveStats,
}

impl Solution {
    pub fn has_values(&self) -> bool {
        self.status.has_solution()
    }

    pub fn max_tank_level(&self) -> f64 {
        self.series.tank_level.iter().copied().fold(0.0, f64::max)
    }

    pub fn units(&self, name: &str) -> Option<f64> {
        self.unit_counts.iter().find(|u| u.name == name).map(|u| u.value)
    }
}

/// Maps solver values back to named quantities.
pub fn extract_solution(inst: &NexusInstance, art: &BuildArtifacts, sol: &MilpSolution, config: &SolverConfig) -> Solution {
    let stats = SolveStats {
        nodes: sol.nodes,
        lp_iterations: sol.lp_iterations,
        best_bound: sol.best_bound,
        workers: sol.workers,
        seed: config.seed,
        relative_gap: config.relative_gap,
    };
    let empty = || Solution {
        status: sol.status,
        mode: inst.mode,
        objective: f64::INFINITY,
        unit_counts: Vec::new(),
        storage: Vec::new(),
        tank_volume: 0.0,
        qp_capacity: 0.0,
        energy_sum: 0.0,
        land_use: 0.0,
        water_use: 0.0,
        series: SolutionSeries::default(),
        costs: CostBreakdown::default(),
        stats: stats.clone(),
    };
    if !sol.status.has_solution() {
        return empty();
    }
    let x = &sol.values;
    let r = &art.registry;
    let get = |v: nexus_milp::VarId| x[v.0];
    let per_step = |vs: &[nexus_milp::VarId]| (0..r.steps).map(|t| get(vs[r.ro(t)])).collect::<Vec<_>>();
    let all = |vs: &[nexus_milp::VarId]| vs.iter().map(|&v| get(v)).collect::<Vec<_>>();
    let stage = |i: usize| (0..r.steps).map(|t| get(r.wr[r.ro(t)][i])).collect::<Vec<_>>();
    let series = SolutionSeries {
        power: all(&r.power),
        ec: per_step(&r.ec),
        qf: per_step(&r.qf),
        qp: per_step(&r.qp),
        wr1: stage(0),
        wr2: stage(1),
        wr3: stage(2),
        wr_sys: per_step(&r.wr_sys),
        q_stor: all(&r.q_stor),
        q_rel: all(&r.q_rel),
        tank_level: all(&r.tank_level),
    };
    let named = |names: &mut dyn Iterator<Item = &String>, vs: &[nexus_milp::VarId]| {
        names.zip(vs).map(|(n, &v)| NamedValue { name: n.clone(), value: get(v) }).collect::<Vec<_>>()
    };
    let storage = inst
        .storage_techs
        .iter()
        .zip(&r.storage)
        .map(|(s, h)| StorageTrace {
            name: s.name.clone(),
            capacity: get(h.capacity),
            soc: all(&h.soc),
            charge: all(&h.charge),
            discharge: all(&h.discharge),
        })
        .collect();
    let costs = CostBreakdown {
        technology: named(&mut inst.technologies.iter().map(|k| &k.name), &r.cost.technology),
        storage: named(&mut inst.storage_techs.iter().map(|s| &s.name), &r.cost.storage),
        ro_investment: get(r.cost.ro_investment),
        ro_operation: get(r.cost.ro_operation),
        tank: get(r.cost.tank),
    };
    Solution {
        status: sol.status,
        mode: inst.mode,
        objective: sol.objective,
        unit_counts: named(&mut inst.technologies.iter().map(|k| &k.name), &r.units),
        storage,
        tank_volume: get(r.tank_volume),
        qp_capacity: get(r.qp_capacity),
        energy_sum: get(r.energy_sum),
        land_use: get(r.land_total),
        water_use: get(r.water_total),
        series,
        costs,
        stats,
    }
}

/// Solves already-built artifacts.
pub fn solve_built(inst: &NexusInstance, art: &BuildArtifacts, config: &SolverConfig) -> Result<Solution, PipelineError> {
    let sol = solve_milp(&art.model, config)?;
    Ok(extract_solution(inst, art, &sol, config))
}

/// Builds and solves `inst` with the built-in solver.
pub fn solve_instance(inst: &NexusInstance, config: &SolverConfig) -> Result<Solution, PipelineError> {
    let art = build(inst)?;
    solve_built(inst, &art, config)
}
