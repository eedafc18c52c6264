//! Linear cost/land surrogates fitted from unit-selection sub-model optima.

use nexus_milp::{solve_milp, LinExpr, MilpModel, ObjSense, Sense, SolveStatus, SolverConfig, VarSpec};
use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::instance::{validate_unit_model, TechnologySurrogate, TechnologyUnitModel, TimeGrid, TimeSeries};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub solver: SolverConfig,
    /// Solve homogeneous fleets with the MILP instead of the closed form.
    pub force_milp: bool,
    /// Threads used for independent targets.
    pub workers: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { solver: SolverConfig::default(), force_milp: false, workers: 1 }
    }
}

/// Optimum of the unit-selection sub-model for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubModelResult {
    /// Horizon energy target [kWh].
    pub target: f64,
    pub units: u32,
    /// Annualized technology plus land cost [$/yr].
    pub cost: f64,
    pub land: f64,
    /// Horizon energy the purchased units can deliver [kWh].
    pub fleet_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub surrogate: TechnologySurrogate,
    pub points: Vec<SubModelResult>,
}

/// Least-squares line `y = slope·x + intercept` and its R².
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Some((slope, intercept, r_squared(y, |i| slope * x[i] + intercept)))
}

/// Coefficient of determination of `pred` against `y`; 1 when `y` is constant
/// and reproduced exactly.
pub fn r_squared(y: &[f64], pred: impl Fn(usize) -> f64) -> f64 {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = y.iter().enumerate().map(|(i, v)| (v - pred(i)).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

fn site_energies(unit: &TechnologyUnitModel, resource: &TimeSeries, dt: f64) -> Vec<f64> {
    unit.site_factors.iter().map(|&f| unit.unit_profile(resource, f).sum() * dt).collect()
}

/// Closed-form optimum for identical units: the fewest units whose combined
/// output reaches the target.
pub fn homogeneous_optimum(unit: &TechnologyUnitModel, resource: &TimeSeries, dt: f64, target: f64) -> Result<SubModelResult, SurrogateError> {
    let per_unit = site_energies(unit, resource, dt).first().copied().unwrap_or(0.0);
    let max = per_unit * unit.site_factors.len() as f64;
    if target > max * (1.0 + 1e-12) {
        return Err(SurrogateError::InfeasibleTarget { target, max_achievable: max });
    }
    let units = if target <= 0.0 { 0 } else { ((target / per_unit) * (1.0 - 1e-12)).ceil() as u32 };
    Ok(result_for(unit, target, units, per_unit * units as f64))
}

fn result_for(unit: &TechnologyUnitModel, target: f64, units: u32, fleet_energy: f64) -> SubModelResult {
    let n = units as f64;
    SubModelResult {
        target,
        units,
        cost: unit.k_tech * n + unit.k_land * unit.area_per_unit() * n,
        land: unit.area_per_unit() * n,
        fleet_energy,
    }
}

/// Solves the unit-selection MILP: buy binaries per site, continuous
/// operation fractions per site and step, `y_op ≤ y_buy`, output ≥ target.
pub fn solve_sub_model(
    unit: &TechnologyUnitModel,
    resource: &TimeSeries,
    dt: f64,
    target: f64,
    solver: &SolverConfig,
) -> Result<SubModelResult, SurrogateError> {
    let energies = site_energies(unit, resource, dt);
    let max: f64 = energies.iter().sum();
    if target > max * (1.0 + 1e-12) {
        return Err(SurrogateError::InfeasibleTarget { target, max_achievable: max });
    }
    let unit_cost = unit.k_tech + unit.k_land * unit.area_per_unit();
    let mut m = MilpModel::new(format!("fit_{}", unit.name));
    let mut output = LinExpr::new();
    let mut cost = LinExpr::new();
    let mut buys = Vec::with_capacity(unit.site_factors.len());
    for (n, &f) in unit.site_factors.iter().enumerate() {
        let buy = m.add_variable(VarSpec::binary(format!("buy_{n}")))?;
        cost.push(buy, unit_cost);
        let profile = unit.unit_profile(resource, f);
        for (t, &p) in profile.values().iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let op = m.add_variable(VarSpec::continuous(format!("op_{n}_{t}"), 0.0, 1.0))?;
            m.add_constraint(&LinExpr::term(op, 1.0).add(buy, -1.0), Sense::Le, 0.0, format!("link_{n}_{t}"))?;
            output.push(op, p * dt);
        }
        buys.push(buy);
    }
    // Identical neighbouring sites are interchangeable; buy them in order.
    for n in 1..buys.len() {
        if unit.site_factors[n] == unit.site_factors[n - 1] {
            m.add_constraint(&LinExpr::term(buys[n], 1.0).add(buys[n - 1], -1.0), Sense::Le, 0.0, format!("order_{n}"))?;
        }
    }
    m.add_constraint(&output, Sense::Ge, target, "target")?;
    m.set_objective(ObjSense::Minimize, &cost)?;
    let sol = solve_milp(&m, solver)?;
    if sol.status != SolveStatus::Optimal {
        return Err(SurrogateError::SubModel(format!("{:?} for target {target}", sol.status)));
    }
    let mut units = 0;
    let mut fleet = 0.0;
    for (b, e) in buys.iter().zip(&energies) {
        if sol.values[b.0] > 0.5 {
            units += 1;
            fleet += e;
        }
    }
    Ok(result_for(unit, target, units, fleet))
}

/// Fits linear cost and land lines over annual fleet output from sub-model
/// optima at each target (horizon energies in kWh).
pub fn fit_technology_surrogate(
    unit: &TechnologyUnitModel,
    resource: &TimeSeries,
    grid: TimeGrid,
    targets: &[f64],
    options: &FitOptions,
) -> Result<FitReport, SurrogateError> {
    if let Some(v) = validate_unit_model(unit).into_iter().next() {
        return Err(SurrogateError::Domain(v.to_string()));
    }
    if resource.len() != grid.horizon_steps {
        return Err(SurrogateError::DimensionMismatch { expected: grid.horizon_steps, got: resource.len() });
    }
    let mut distinct: Vec<f64> = targets.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(SurrogateError::TooFewTargets(distinct.len()));
    }
    let dt = grid.dt_hours;
    let solve_one = |target: f64| {
        if unit.is_homogeneous() && !options.force_milp {
            homogeneous_optimum(unit, resource, dt, target)
        } else {
            solve_sub_model(unit, resource, dt, target, &options.solver)
        }
    };
    let points = run_targets(targets, options.workers.max(1), &solve_one)?;

    let af = grid.annualization();
    let x: Vec<f64> = points.iter().map(|p| p.fleet_energy * af).collect();
    let cost: Vec<f64> = points.iter().map(|p| p.cost).collect();
    let land: Vec<f64> = points.iter().map(|p| p.land).collect();
    let (cost_slope, cost_intercept, r_squared_cost) = linear_fit(&x, &cost).ok_or(SurrogateError::DegenerateFit)?;
    let (land_slope, land_intercept, r_squared_land) = linear_fit(&x, &land).ok_or(SurrogateError::DegenerateFit)?;

    let sites = unit.site_factors.len() as f64;
    let mut profile = TimeSeries::constant(grid.horizon_steps, 0.0);
    for &f in &unit.site_factors {
        for (acc, p) in profile.0.iter_mut().zip(unit.unit_profile(resource, f).values()) {
            *acc += p / sites;
        }
    }
    let surrogate = TechnologySurrogate {
        name: unit.name.clone(),
        cost_slope: cost_slope.max(0.0),
        cost_intercept: cost_intercept.max(0.0),
        land_slope: land_slope.max(0.0),
        land_intercept: land_intercept.max(0.0),
        r_squared_cost: r_squared_cost.clamp(0.0, 1.0),
        r_squared_land: r_squared_land.clamp(0.0, 1.0),
        per_unit_energy: profile.sum() * dt * af,
        per_unit_profile: profile,
        max_units: unit.site_factors.len() as u32,
    };
    Ok(FitReport { surrogate, points })
}

/// Closed-form lines for a homogeneous fleet: cost and land scale with the
/// unit count, spread over one unit's annual output, plus a fixed cost.
pub fn per_unit_surrogate(
    unit: &TechnologyUnitModel,
    resource: &TimeSeries,
    grid: TimeGrid,
    fixed_cost: f64,
) -> Result<TechnologySurrogate, SurrogateError> {
    if let Some(v) = validate_unit_model(unit).into_iter().next() {
        return Err(SurrogateError::Domain(v.to_string()));
    }
    if !unit.is_homogeneous() {
        return Err(SurrogateError::Domain(format!("{}: per-unit lines need identical sites", unit.name)));
    }
    let profile = unit.unit_profile(resource, unit.site_factors[0]);
    let per_unit_energy = profile.sum() * grid.dt_hours * grid.annualization();
    if !(per_unit_energy > 0.0) {
        return Err(SurrogateError::DegenerateFit);
    }
    let unit_cost = unit.k_tech + unit.k_land * unit.area_per_unit();
    Ok(TechnologySurrogate {
        name: unit.name.clone(),
        cost_slope: unit_cost / per_unit_energy,
        cost_intercept: fixed_cost,
        land_slope: unit.area_per_unit() / per_unit_energy,
        land_intercept: 0.0,
        r_squared_cost: 1.0,
        r_squared_land: 1.0,
        per_unit_energy,
        per_unit_profile: profile,
        max_units: unit.site_factors.len() as u32,
    })
}

fn run_targets<F>(targets: &[f64], workers: usize, solve: &F) -> Result<Vec<SubModelResult>, SurrogateError>
where
    F: Fn(f64) -> Result<SubModelResult, SurrogateError> + Sync,
{
    if workers == 1 || targets.len() < 2 {
        return targets.iter().map(|&t| solve(t)).collect();
    }
    let chunk = targets.len().div_ceil(workers);
    let results: Vec<Vec<Result<SubModelResult, SurrogateError>>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            targets.chunks(chunk).map(|c| s.spawn(move || c.iter().map(|&t| solve(t)).collect::<Vec<_>>())).collect();
        handles.into_iter().map(|h| h.join().expect("target worker panicked")).collect()
    });
    results.into_iter().flatten().collect()
}
