mod common;

use nexus_core::instance::{AffineScaling, BiomassLink, NexusInstance, SolveMode, TimeSeries};
use nexus_core::solution::{CostBreakdown, NamedValue, Solution, SolutionSeries, SolveStats, StorageTrace};
use nexus_core::synthetic;
use nexus_core::validator::{check_solution, energy_mix_report, ValidationError};
use nexus_milp::SolveStatus;

/// Zero demands and an EC map that is identically zero.
fn quiet_instance(steps: usize) -> NexusInstance {
    let mut inst = synthetic::zero_water_demand(steps);
    inst.demands.power_demand = TimeSeries::constant(steps, 0.0);
    inst.demands.power_total_target = 0.0;
    inst.ro.ec_output_scaling = AffineScaling { scale: 0.0, offset: 0.0 };
    inst
}

/// Stage recoveries shifted equally from nominal so that the permeate
/// surrogate gives exactly zero at the minimum feed.
fn idle_point(inst: &NexusInstance) -> ([f64; 3], f64) {
    let ro = &inst.ro;
    let nom = ro.nominal_point;
    let qf = ro.qf_bounds.0;
    let qp = nexus_core::surrogates::build_qp_taylor(nom.qp, nom.wr_sys).unwrap();
    let target = qp.expansion_point[0]
        - (qp.value_at_point + qp.gradient[1] * (qf - qp.expansion_point[1])) / qp.gradient[0];
    let wr = nexus_core::surrogates::build_wr_sys_taylor(nom.stages()).unwrap();
    let shift = (target - wr.value_at_point) / wr.gradient.iter().sum::<f64>();
    ([nom.wr1 + shift, nom.wr2 + shift, nom.wr3 + shift], qf)
}

fn zero_solution(inst: &NexusInstance) -> Solution {
    let steps = inst.grid.horizon_steps;
    let ([w1, w2, w3], qf) = idle_point(inst);
    let wr_s = nexus_core::surrogates::build_wr_sys_taylor(inst.ro.nominal_point.stages()).unwrap();
    let zeros = vec![0.0; steps];
    let ro = &inst.ro;
    let tank = inst.water_tank;
    let costs = CostBreakdown {
        technology: inst.technologies.iter().map(|k| NamedValue { name: k.name.clone(), value: 0.0 }).collect(),
        storage: inst.storage_techs.iter().map(|s| NamedValue { name: s.name.clone(), value: 0.0 }).collect(),
        ro_investment: ro.inv_cost_intercept / ro.plant_life_years,
        ro_operation: 0.0,
        tank: tank.cost_intercept / tank.life_years,
    };
    Solution {
        status: SolveStatus::Optimal,
        mode: inst.mode,
        objective: costs.total(),
        unit_counts: inst.technologies.iter().map(|k| NamedValue { name: k.name.clone(), value: 0.0 }).collect(),
        storage: inst
            .storage_techs
            .iter()
            .map(|s| StorageTrace {
                name: s.name.clone(),
                capacity: 0.0,
                soc: vec![0.0; steps + 1],
                charge: zeros.clone(),
                discharge: zeros.clone(),
            })
            .collect(),
        tank_volume: 0.0,
        qp_capacity: 0.0,
        energy_sum: 0.0,
        land_use: 0.0,
        water_use: qf * steps as f64 * inst.grid.dt_hours,
        series: SolutionSeries {
            power: zeros.clone(),
            ec: zeros.clone(),
            qf: vec![qf; steps],
            qp: zeros.clone(),
            wr1: vec![w1; steps],
            wr2: vec![w2; steps],
            wr3: vec![w3; steps],
            wr_sys: vec![wr_s.evaluate(&[w1, w2, w3]); steps],
            q_stor: zeros.clone(),
            q_rel: zeros,
            tank_level: vec![0.0; steps + 1],
        },
        costs,
        stats: SolveStats { nodes: 0, lp_iterations: 0, best_bound: 0.0, workers: 1, seed: 0, relative_gap: 0.0 },
    }
}

#[test]
fn all_zero_flows_pass() {
    let inst = quiet_instance(12);
    let sol = zero_solution(&inst);
    let report = check_solution(&inst, &sol, common::TOL).unwrap();
    assert!(report.pass, "{:?}", report.flagged_names());
    assert!(report.max_ec_deviation <= 1e-12);
}

#[test]
fn greenhouse_and_city_demand_balance_exactly() {
    let mut inst = synthetic::bundled_day();
    inst.demands.greenhouse_count = 0;
    let mut sol = common::solve_checked(&inst);
    let solar = sol.units("solar").unwrap();
    assert!(solar > 0.0);
    inst.biomass = Some(BiomassLink { technology: "solar".into(), water_per_unit: TimeSeries::constant(24, 30.0 / solar) });
    sol.series.qp[5] = 600.0;
    sol.series.q_stor[5] = 0.0;
    sol.series.q_rel[5] = 0.0;
    let report = check_solution(&inst, &sol, common::TOL).unwrap();
    assert!(report.get("water_balance[6]").unwrap().value <= 1e-12);
}

#[test]
fn moving_one_tank_level_flags_its_two_balances() {
    let inst = synthetic::bundled_day();
    let sol = common::solve_checked(&inst);
    let v = &sol.series.tank_level;
    let t = (2..inst.grid.horizon_steps - 1)
        .find(|&t| v[t] >= 1.0 && v[t] + 1.0 <= sol.tank_volume)
        .expect("a level with room on both sides");
    let mut bad = sol.clone();
    bad.series.tank_level[t] += 1.0;
    let report = check_solution(&inst, &bad, common::TOL).unwrap();
    assert_eq!(report.flagged_names(), vec![format!("tank_dynamics[{t}]"), format!("tank_dynamics[{}]", t + 1)]);
}

#[test]
fn wrong_lengths_are_a_grid_mismatch() {
    let inst = quiet_instance(12);
    let mut sol = zero_solution(&inst);
    sol.series.qp.pop();
    assert!(matches!(check_solution(&inst, &sol, common::TOL), Err(ValidationError::GridMismatch { .. })));
    sol.status = SolveStatus::Infeasible;
    assert!(matches!(check_solution(&inst, &sol, common::TOL), Err(ValidationError::NoValues(_))));
}

#[test]
fn objective_mismatch_is_flagged() {
    let inst = synthetic::bundled_day();
    let mut sol = common::solve_checked(&inst);
    sol.objective *= 1.001;
    let report = check_solution(&inst, &sol, common::TOL).unwrap();
    assert_eq!(report.flagged_names(), vec!["objective".to_string()]);
}

#[test]
fn energy_mix_shares_add_up() {
    let inst = synthetic::bundled_day();
    let sol = common::solve_checked(&inst);
    let mix = energy_mix_report(&inst, &sol, common::TOL).unwrap();
    let energy: f64 = mix.technologies.iter().map(|t| t.energy_share).sum();
    let cost: f64 = mix.costs.iter().map(|c| c.share).sum();
    assert!((energy - 100.0).abs() <= 0.01 && (cost - 100.0).abs() <= 0.01);
    let c = &sol.costs;
    let expected = [c.technology[0].value, c.technology[1].value, c.storage[0].value, c.ro_investment, c.ro_operation, c.tank];
    for (share, want) in mix.costs.iter().zip(expected) {
        assert!((share.cost - want).abs() <= 1e-6 * want.abs().max(1.0));
    }
    for t in &mix.technologies {
        let k = inst.technologies.iter().find(|k| k.name == t.name).unwrap();
        common::assert_close(t.horizon_energy, t.units * k.per_unit_profile.sum(), 1e-12);
    }
}

#[test]
fn single_technology_supplies_everything() {
    let mut inst = synthetic::bundled_day();
    inst.technologies.truncate(1);
    let sol = common::solve_checked(&inst);
    let mix = energy_mix_report(&inst, &sol, common::TOL).unwrap();
    assert_eq!(mix.technologies[0].energy_share, 100.0);
}

#[test]
fn wind_dominates_when_it_is_the_only_economic_option() {
    let mut inst = synthetic::bundled_day();
    inst.mode = SolveMode::Steady;
    inst.technologies[1].cost_slope *= 20.0;
    let sol = common::solve_checked(&inst);
    let mix = energy_mix_report(&inst, &sol, common::TOL).unwrap();
    assert!(mix.technologies[0].energy_share >= 99.0, "{:?}", mix.technologies);
}

#[test]
fn failing_solutions_get_no_mix() {
    let inst = synthetic::bundled_day();
    let mut sol = common::solve_checked(&inst);
    sol.series.power[3] += 10.0;
    assert!(matches!(energy_mix_report(&inst, &sol, common::TOL), Err(ValidationError::Failed(_))));
}
