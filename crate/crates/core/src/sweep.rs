//! ε-constraint sweeps and the steady-versus-full water storage study.

use nexus_milp::{SolveStatus, SolverConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::{apply_epsilon, build, BuildArtifacts, BuildError};
use crate::instance::{NexusInstance, SolveMode};
use crate::solution::{solve_built, PipelineError, Solution};
use crate::validator::{check_solution, energy_mix_report, CostShare, TechnologyEnergy, ValidationReport};

/// Tank levels at or below this [m³] count as unused.
pub const TANK_USE_THRESHOLD: f64 = 1e-3;

/// Relative tolerance used for the validator on sweep rows.
pub const SWEEP_VALIDATION_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("fractions must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("the unrestricted instance has no solution (status {status:?}){}", diagnostics.as_ref().map(|d| format!(": {d}")).unwrap_or_default())]
    Baseline { status: SolveStatus, diagnostics: Option<String> },
    #[error("both modes failed: full {full:?}, steady {steady:?}")]
    BothFailed { full: SolveStatus, steady: SolveStatus },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl From<BuildError> for SweepError {
    fn from(e: BuildError) -> Self {
        SweepError::Pipeline(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub objective: f64,
    pub land_use: f64,
    pub water_use: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub land_fraction: f64,
    pub water_fraction: f64,
    pub epsilon_land: f64,
    pub epsilon_water: f64,
    pub status: SolveStatus,
    /// Infinite when the point has no solution.
    pub objective: f64,
    pub validator_pass: Option<bool>,
    pub energy_mix: Vec<TechnologyEnergy>,
    pub cost_shares: Vec<CostShare>,
    /// Why the point has no solution, when known before solving.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub instance: String,
    pub mode: SolveMode,
    pub baseline: Baseline,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, land_fraction: f64, water_fraction: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.land_fraction == land_fraction && r.water_fraction == water_fraction)
    }
}

fn check_fraction(f: f64) -> Result<(), SweepError> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(SweepError::BadFraction(f))
    }
}

/// Solves the instance without ε limits and reports its land and water use.
pub fn solve_baseline(inst: &NexusInstance, config: &SolverConfig) -> Result<(Solution, BuildArtifacts), SweepError> {
    let mut free = inst.clone();
    free.epsilon_land = None;
    free.epsilon_water = None;
    let art = build(&free)?;
    let sol = solve_built(&free, &art, config)?;
    if !sol.has_values() {
        return Err(SweepError::Baseline { status: sol.status, diagnostics: None });
    }
    let report = check_solution(&free, &sol, SWEEP_VALIDATION_TOL).map_err(|e| SweepError::Baseline {
        status: sol.status,
        diagnostics: Some(e.to_string()),
    })?;
    if !report.pass {
        return Err(SweepError::Baseline { status: sol.status, diagnostics: Some(report.flagged_names().join(", ")) });
    }
    Ok((sol, art))
}

fn solve_point(
    inst: &NexusInstance,
    base: &BuildArtifacts,
    baseline: &Baseline,
    (fl, fw): (f64, f64),
    config: &SolverConfig,
) -> Result<SweepRow, SweepError> {
    let eps_l = fl * baseline.land_use;
    let eps_w = fw * baseline.water_use;
    let mut row = SweepRow {
        land_fraction: fl,
        water_fraction: fw,
        epsilon_land: eps_l,
        epsilon_water: eps_w,
        status: SolveStatus::Infeasible,
        objective: f64::INFINITY,
        validator_pass: None,
        energy_mix: Vec::new(),
        cost_shares: Vec::new(),
        note: None,
    };
    let mut point = inst.clone();
    // A zero baseline use cannot be restricted further; leave it unlimited.
    point.epsilon_land = (eps_l > 0.0).then_some(eps_l);
    point.epsilon_water = (eps_w > 0.0).then_some(eps_w);
    let mut art = base.clone();
    match apply_epsilon(&mut art, point.epsilon_land, point.epsilon_water) {
        Ok(()) => {}
        Err(e @ BuildError::GuaranteedInfeasible { .. }) => {
            row.note = Some(e.to_string());
            return Ok(row);
        }
        Err(e) => return Err(e.into()),
    }
    let sol = solve_built(&point, &art, config)?;
    row.status = sol.status;
    if sol.has_values() {
        row.objective = sol.objective;
        let pass = check_solution(&point, &sol, SWEEP_VALIDATION_TOL).map(|r| r.pass).unwrap_or(false);
        row.validator_pass = Some(pass);
        if let Ok(mix) = energy_mix_report(&point, &sol, SWEEP_VALIDATION_TOL) {
            row.energy_mix = mix.technologies;
            row.cost_shares = mix.costs;
        }
    }
    Ok(row)
}

/// Solves every (land, water) fraction pair with ε = fraction × baseline use.
/// Rows come back in grid order (land-major) regardless of `workers`.
pub fn epsilon_sweep(
    inst: &NexusInstance,
    land_fractions: &[f64],
    water_fractions: &[f64],
    config: &SolverConfig,
    workers: usize,
) -> Result<SweepTable, SweepError> {
    for &f in land_fractions.iter().chain(water_fractions) {
        check_fraction(f)?;
    }
    let (sol, _) = solve_baseline(inst, config)?;
    let baseline = Baseline { objective: sol.objective, land_use: sol.land_use, water_use: sol.water_use };
    let mut free = inst.clone();
    free.epsilon_land = None;
    free.epsilon_water = None;
    let base = build(&free)?;
    let grid: Vec<(f64, f64)> =
        land_fractions.iter().flat_map(|&l| water_fractions.iter().map(move |&w| (l, w))).collect();
    let rows: Vec<Result<SweepRow, SweepError>> = if workers <= 1 {
        grid.iter().map(|&p| solve_point(&free, &base, &baseline, p, config)).collect()
    } else {
        let chunk = grid.len().div_ceil(workers).max(1);
        std::thread::scope(|s| {
            let handles: Vec<_> = grid
                .chunks(chunk)
                .map(|c| {
                    let (free, base, baseline) = (&free, &base, &baseline);
                    s.spawn(move || c.iter().map(|&p| solve_point(free, base, baseline, p, config)).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
        })
    };
    Ok(SweepTable { instance: inst.name.clone(), mode: inst.mode, baseline, rows: rows.into_iter().collect::<Result<_, _>>()? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageStudy {
    pub water_fraction: f64,
    pub baseline_water_use: f64,
    pub epsilon_water: f64,
    pub full: Solution,
    pub steady: Solution,
    pub full_report: Option<ValidationReport>,
    pub steady_report: Option<ValidationReport>,
    pub full_max_level: f64,
    pub steady_max_level: f64,
    /// Whether the full-mode solution stores water.
    pub water_storage_used: bool,
    /// Steady-mode objective minus full-mode objective.
    pub steady_gap: f64,
}

/// Solves the instance in full and steady mode under ε_W = `water_fraction`
/// × the unrestricted full-mode water use, and compares tank usage.
pub fn storage_phenomenon_study(inst: &NexusInstance, water_fraction: f64, config: &SolverConfig) -> Result<StorageStudy, SweepError> {
    check_fraction(water_fraction)?;
    let mut full = inst.clone();
    full.mode = SolveMode::Full;
    full.epsilon_land = None;
    let (baseline, _) = solve_baseline(&full, config)?;
    let eps = water_fraction * baseline.water_use;
    full.epsilon_water = Some(eps);
    let mut steady = full.clone();
    steady.mode = SolveMode::Steady;

    let run = |i: &NexusInstance| -> Result<(Solution, Option<ValidationReport>), SweepError> {
        let sol = crate::solution::solve_instance(i, config)?;
        let report = if sol.has_values() { check_solution(i, &sol, SWEEP_VALIDATION_TOL).ok() } else { None };
        Ok((sol, report))
    };
    let (fs, fr) = run(&full)?;
    let (ss, sr) = run(&steady)?;
    if !fs.has_values() && !ss.has_values() {
        return Err(SweepError::BothFailed { full: fs.status, steady: ss.status });
    }
    let full_max = fs.max_tank_level();
    let steady_max = ss.max_tank_level();
    Ok(StorageStudy {
        water_fraction,
        baseline_water_use: baseline.water_use,
        epsilon_water: eps,
        water_storage_used: fs.has_values() && full_max > TANK_USE_THRESHOLD,
        steady_gap: ss.objective - fs.objective,
        full_max_level: full_max,
        steady_max_level: steady_max,
        full: fs,
        steady: ss,
        full_report: fr,
        steady_report: sr,
    })
}
