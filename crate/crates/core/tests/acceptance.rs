//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion with
//! its runtime, then fails if any criterion failed.

mod common;
#[path = "../../milp/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nexus_core::builder::build;
use nexus_core::instance::{NexusInstance, RoPlantParams, SolveMode, PowerCurve, TechnologyUnitModel, TimeGrid};
use nexus_core::solution::{solve_instance, Solution};
use nexus_core::surrogates::fitting::{homogeneous_optimum, solve_sub_model};
use nexus_core::surrogates::{fit_technology_surrogate, relu_forward, taylor_accuracy, FitOptions, ReluNetwork};
use nexus_core::sweep::{epsilon_sweep, storage_phenomenon_study, TANK_USE_THRESHOLD};
use nexus_core::synthetic;
use nexus_core::validator::check_solution;
use nexus_milp::{solve_lp, solve_milp, SolveStatus, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Every solution produced along the way, re-checked by criterion 7.
static SOLVED: Mutex<Vec<(NexusInstance, Solution)>> = Mutex::new(Vec::new());

fn keep(inst: &NexusInstance, sol: &Solution) {
    if sol.has_values() {
        SOLVED.lock().unwrap().push((inst.clone(), sol.clone()));
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn taylor_accuracy_criterion() -> Outcome {
    let acc = taylor_accuracy(&RoPlantParams::reference(), 20_000, &mut ChaCha8Rng::seed_from_u64(1)).map_err(|e| e.to_string())?;
    ensure(acc.wr_sys_r_squared >= 0.95 && acc.qp_r_squared >= 0.95, || format!("{acc:?}"))?;
    Ok(format!(
        "R² WRsys {:.4} ({} samples), Qp {:.4} ({} samples)",
        acc.wr_sys_r_squared, acc.wr_sys_samples, acc.qp_r_squared, acc.qp_samples
    ))
}

fn relu_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut nets = vec![(ReluNetwork::ec_reference(), vec![(0.0, 1.0); 4])];
    for _ in 0..5 {
        let net = common::random_network(&mut rng);
        let bounds = vec![(-1.5, 1.5); net.input_dim()];
        nets.push((net, bounds));
    }
    let mut worst: f64 = 0.0;
    for (k, (net, bounds)) in nets.iter().enumerate() {
        for _ in 0..100 {
            let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
            let dev = (relu_forward(net, &x).unwrap() - common::encoded_output(net, bounds, &x)).abs();
            ensure(dev <= 1e-6, || format!("network {k}: deviation {dev:e} at {x:?}"))?;
            worst = worst.max(dev);
        }
    }
    Ok(format!("6 networks × 100 inputs, max deviation {worst:.1e}"))
}

fn solver_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SolverConfig::default();
    let mut feasible = (0, 0);
    for case in 0..100 {
        let model = support::random_binary_milp(&mut rng, 12, 10);
        let sol = solve_milp(&model, &cfg).map_err(|e| e.to_string())?;
        match support::enumerate_binary(&model) {
            None => ensure(sol.status == SolveStatus::Infeasible, || format!("MILP {case}: {:?}, expected infeasible", sol.status))?,
            Some(best) => {
                feasible.0 += 1;
                ensure(sol.status == SolveStatus::Optimal && (sol.objective - best).abs() < 1e-6, || {
                    format!("MILP {case}: {:?} {} vs {best}", sol.status, sol.objective)
                })?
            }
        }
    }
    for case in 0..100 {
        let model = support::random_lp(&mut rng, 10, 10);
        let lp = solve_lp(&model, &cfg).map_err(|e| e.to_string())?;
        match support::vertex_enumeration(&model) {
            None => ensure(lp.status == SolveStatus::Infeasible, || format!("LP {case}: {:?}, expected infeasible", lp.status))?,
            Some(best) => {
                feasible.1 += 1;
                ensure(lp.status == SolveStatus::Optimal && (lp.objective - best).abs() <= 1e-6 * best.abs().max(1.0), || {
                    format!("LP {case}: {:?} {} vs {best}", lp.status, lp.objective)
                })?
            }
        }
    }
    Ok(format!("100 MILPs ({} feasible) and 100 LPs ({} feasible) match the oracles", feasible.0, feasible.1))
}

fn size_scaling() -> Outcome {
    let small = build(&synthetic::bundled(24)).map_err(|e| e.to_string())?.size;
    let large = build(&synthetic::bundled(336)).map_err(|e| e.to_string())?.size;
    let mut parts = Vec::new();
    for (name, a, b) in
        [("rows", small.rows, large.rows), ("continuous", small.continuous, large.continuous), ("binaries", small.binaries, large.binaries)]
    {
        let ratio = b as f64 / a as f64;
        ensure((ratio / 14.0 - 1.0).abs() <= 0.10, || format!("{name}: {a} → {b}, ratio {ratio:.3}"))?;
        parts.push(format!("{name} {a}→{b} ({ratio:.2}×)"));
    }
    Ok(parts.join(", "))
}

fn upper_bound() -> Outcome {
    let cfg = SolverConfig::default();
    let mut gaps = Vec::new();
    let mut seed = 0;
    while gaps.len() < 10 {
        ensure(seed < 30, || format!("only {} of {seed} seeds solvable in both modes", gaps.len()))?;
        let mut inst = synthetic::random_instance(seed, 48);
        seed += 1;
        inst.mode = SolveMode::Full;
        let full = solve_instance(&inst, &cfg).map_err(|e| e.to_string())?;
        let mut steady_inst = inst.clone();
        steady_inst.mode = SolveMode::Steady;
        let steady = solve_instance(&steady_inst, &cfg).map_err(|e| e.to_string())?;
        if full.status != SolveStatus::Optimal || steady.status != SolveStatus::Optimal {
            continue;
        }
        keep(&inst, &full);
        keep(&steady_inst, &steady);
        let gap = steady.objective - full.objective;
        ensure(gap >= -1e-9 * full.objective.abs(), || format!("seed {}: steady {} < full {}", seed - 1, steady.objective, full.objective))?;
        gaps.push(gap / full.objective);
    }
    let max = gaps.iter().copied().fold(0.0, f64::max);
    Ok(format!("10 instances ({seed} seeds tried), relative gap 0 … {:.3}%", 100.0 * max))
}

fn storage_phenomenon() -> Outcome {
    let inst = synthetic::tight_water();
    let study = storage_phenomenon_study(&inst, 0.99, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let mut full = inst.clone();
    full.mode = SolveMode::Full;
    full.epsilon_land = None;
    full.epsilon_water = Some(study.epsilon_water);
    let mut steady = full.clone();
    steady.mode = SolveMode::Steady;
    keep(&full, &study.full);
    keep(&steady, &study.steady);
    ensure(study.water_storage_used, || format!("full mode max V = {}", study.full_max_level))?;
    ensure(study.steady_max_level <= TANK_USE_THRESHOLD, || format!("steady mode max V = {}", study.steady_max_level))?;
    Ok(format!(
        "{} steps, ε_W {:.1} m³: full max V {:.1} m³, steady max V {:.1e} m³, steady − full {:.1} $/yr",
        inst.grid.horizon_steps, study.epsilon_water, study.full_max_level, study.steady_max_level, study.steady_gap
    ))
}

fn perturbation_detection(inst: &NexusInstance, sol: &Solution) -> Result<usize, String> {
    let mut checked = 0;
    let paths: Vec<(&str, usize)> = ["qp", "q_stor", "q_rel", "tank_level", "power"]
        .iter()
        .flat_map(|&s| (0..series(sol, s).len()).map(move |t| (s, t)))
        .collect();
    for (name, t) in paths {
        let v = series(sol, name)[t];
        if v.abs() <= 1e-6 {
            continue;
        }
        for sign in [1.0, -1.0] {
            let mut bad = sol.clone();
            series_mut(&mut bad, name)[t] = v * (1.0 + sign * 1e-3);
            let report = check_solution(inst, &bad, common::TOL).map_err(|e| e.to_string())?;
            ensure(!report.pass, || format!("{name}[{t}] ×(1{}1e-3) not detected", if sign > 0.0 { "+" } else { "−" }))?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn series<'a>(sol: &'a Solution, name: &str) -> &'a [f64] {
    let s = &sol.series;
    match name {
        "qp" => &s.qp,
        "q_stor" => &s.q_stor,
        "q_rel" => &s.q_rel,
        "tank_level" => &s.tank_level,
        "power" => &s.power,
        _ => unreachable!(),
    }
}

fn series_mut<'a>(sol: &'a mut Solution, name: &str) -> &'a mut Vec<f64> {
    let s = &mut sol.series;
    match name {
        "qp" => &mut s.qp,
        "q_stor" => &mut s.q_stor,
        "q_rel" => &mut s.q_rel,
        "tank_level" => &mut s.tank_level,
        "power" => &mut s.power,
        _ => unreachable!(),
    }
}

fn validator_soundness() -> Outcome {
    let day = synthetic::bundled_day();
    let sol = solve_instance(&day, &SolverConfig::default()).map_err(|e| e.to_string())?;
    keep(&day, &sol);
    let solved = SOLVED.lock().unwrap().clone();
    for (inst, sol) in &solved {
        let report = check_solution(inst, sol, common::TOL).map_err(|e| e.to_string())?;
        ensure(report.pass, || format!("{} ({:?}) flagged {:?}", inst.name, inst.mode, report.flagged_names()))?;
    }
    let mut perturbed = 0;
    for (inst, sol) in solved.iter().filter(|(i, _)| i.mode == SolveMode::Full).take(3) {
        perturbed += perturbation_detection(inst, sol)?;
    }
    Ok(format!("{} solutions re-checked at 1e-6, {perturbed} perturbations of 1e-3 all detected", solved.len()))
}

fn epsilon_monotonicity() -> Outcome {
    let inst = synthetic::bundled_day();
    let land = [0.9, 0.95, 1.0];
    let water = [0.98, 0.99, 1.0];
    let table = epsilon_sweep(&inst, &land, &water, &SolverConfig::default(), 3).map_err(|e| e.to_string())?;
    let obj = |l: f64, w: f64| table.row(l, w).unwrap().objective;
    for r in &table.rows {
        ensure(r.status == SolveStatus::Optimal && r.validator_pass == Some(true), || format!("{r:?}"))?;
    }
    for i in 0..3 {
        for j in 0..3 {
            let here = obj(land[i], water[j]);
            if i < 2 {
                ensure(obj(land[i + 1], water[j]) <= here * (1.0 + 1e-9), || format!("land {} → {}", land[i], land[i + 1]))?;
            }
            if j < 2 {
                ensure(obj(land[i], water[j + 1]) <= here * (1.0 + 1e-9), || format!("water {} → {}", water[j], water[j + 1]))?;
            }
        }
    }
    let free = solve_instance(&inst, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let anchor = obj(1.0, 1.0);
    ensure((anchor - free.objective).abs() <= 1e-9 * free.objective, || format!("(1,1) {anchor} vs unrestricted {}", free.objective))?;
    Ok(format!("objective {:.0} … {:.0} $/yr, (1,1) equals unrestricted {:.0}", anchor, obj(0.9, 0.98), free.objective))
}

fn fitter_sanity() -> Outcome {
    let unit = TechnologyUnitModel {
        name: "wind".into(),
        k_tech: 52_000.0,
        k_land: 400.0,
        area_tech: 0.5,
        area_spacing: 15.0,
        power_curve: PowerCurve::wind_turbine(500.0, 3.0, 12.0, 25.0),
        site_factors: vec![1.0; 20],
    };
    let steps = 48;
    let resource = synthetic::random_wind(steps, &mut ChaCha8Rng::seed_from_u64(9));
    let per_unit = unit.unit_profile(&resource, 1.0).sum();
    // Targets off the unit grid; lines are regressed on achieved output.
    let targets: Vec<f64> = (0..=11).map(|k| per_unit * 20.0 * (0.05 + 0.9 * k as f64 / 11.0)).collect();
    let report = fit_technology_surrogate(&unit, &resource, TimeGrid::hourly(steps), &targets, &FitOptions::default())
        .map_err(|e| e.to_string())?;
    let s = &report.surrogate;
    ensure(s.r_squared_cost >= 0.97 && s.r_squared_land >= 0.97, || format!("R² cost {} land {}", s.r_squared_cost, s.r_squared_land))?;
    let cfg = SolverConfig::default();
    for k in 0..=40 {
        let target = per_unit * k as f64 * 0.5;
        let closed = homogeneous_optimum(&unit, &resource, 1.0, target).map_err(|e| e.to_string())?;
        let milp = solve_sub_model(&unit, &resource, 1.0, target, &cfg).map_err(|e| e.to_string())?;
        let ceil = ((target / per_unit) - 1e-9).ceil().max(0.0) as u32;
        ensure(closed.units == ceil && milp.units == ceil && (milp.cost - closed.cost).abs() <= 1e-9 * closed.cost.max(1.0), || {
            format!("target {target}: closed {} milp {} ⌈⌉ {ceil}", closed.units, milp.units)
        })?;
    }
    Ok(format!("R² cost {:.4}, land {:.4}; 41 sub-model optima equal ⌈target/unit⌉", s.r_squared_cost, s.r_squared_land))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("Taylor surrogate accuracy", Duration::from_secs(1), taylor_accuracy_criterion),
        ("ReLU MILP exactness", Duration::from_secs(30), relu_exactness),
        ("solver correctness", Duration::from_secs(60), solver_correctness),
        ("model size scaling", Duration::from_secs(5), size_scaling),
        ("steady-state upper bound", Duration::from_secs(600), upper_bound),
        ("water storage phenomenon", Duration::from_secs(600), storage_phenomenon),
        ("validator soundness", Duration::from_secs(30), validator_soundness),
        ("ε monotonicity", Duration::from_secs(600), epsilon_monotonicity),
        ("surrogate fitter sanity", Duration::from_secs(60), fitter_sanity),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > *limit => Err(format!("took {took:.1?}, limit {limit:?}; {detail}")),
            other => other,
        };
        match &outcome {
            Ok(detail) => println!("criterion {}: PASS [{:.2}s] {name}: {detail}", i + 1, took.as_secs_f64()),
            Err(why) => {
                println!("criterion {}: FAIL [{:.2}s] {name}: {why}", i + 1, took.as_secs_f64());
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
