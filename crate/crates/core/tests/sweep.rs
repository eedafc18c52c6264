mod common;

use nexus_core::instance::SolveMode;
use nexus_core::solution::solve_instance;
use nexus_core::sweep::{epsilon_sweep, storage_phenomenon_study, SweepError, SweepTable, TANK_USE_THRESHOLD};
use nexus_core::synthetic;
use nexus_milp::{SolveStatus, SolverConfig};

const LAND: [f64; 3] = [0.9, 0.95, 1.0];
const WATER: [f64; 3] = [0.98, 0.99, 1.0];

fn assert_monotone(table: &SweepTable) {
    for (i, &l) in LAND.iter().enumerate() {
        for (j, &w) in WATER.iter().enumerate() {
            let here = table.row(l, w).unwrap().objective;
            if i + 1 < LAND.len() {
                assert!(table.row(LAND[i + 1], w).unwrap().objective <= here * (1.0 + 1e-9), "land {l} → {}", LAND[i + 1]);
            }
            if j + 1 < WATER.len() {
                assert!(table.row(l, WATER[j + 1]).unwrap().objective <= here * (1.0 + 1e-9), "water {w} → {}", WATER[j + 1]);
            }
        }
    }
}

#[test]
fn three_by_three_sweep_is_monotone_and_anchored() {
    let inst = synthetic::bundled_day();
    let table = epsilon_sweep(&inst, &LAND, &WATER, &SolverConfig::default(), 3).unwrap();
    assert_eq!(table.rows.len(), 9);
    let order: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.land_fraction, r.water_fraction)).collect();
    let expected: Vec<(f64, f64)> = LAND.iter().flat_map(|&l| WATER.iter().map(move |&w| (l, w))).collect();
    assert_eq!(order, expected);
    for r in &table.rows {
        assert_eq!(r.status, SolveStatus::Optimal, "{r:?}");
        assert_eq!(r.validator_pass, Some(true));
    }
    assert_monotone(&table);
    let free = solve_instance(&inst, &SolverConfig::default()).unwrap();
    common::assert_close(table.row(1.0, 1.0).unwrap().objective, free.objective, 1e-9);
    common::assert_close(table.baseline.objective, free.objective, 1e-12);
}

#[test]
fn worker_count_does_not_change_results() {
    let inst = synthetic::bundled(12);
    let config = SolverConfig::default();
    let serial = epsilon_sweep(&inst, &[0.95, 1.0], &[0.99, 1.0], &config, 1).unwrap();
    let parallel = epsilon_sweep(&inst, &[0.95, 1.0], &[0.99, 1.0], &config, 4).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn bad_fractions_are_rejected() {
    let inst = synthetic::bundled(12);
    for f in [0.0, -0.5, 1.5, f64::NAN] {
        let err = epsilon_sweep(&inst, &[f], &[1.0], &SolverConfig::default(), 1).unwrap_err();
        assert!(matches!(err, SweepError::BadFraction(_)));
    }
}

#[test]
fn impossible_water_limits_are_noted_not_solved() {
    let inst = synthetic::bundled(12);
    let table = epsilon_sweep(&inst, &[1.0], &[0.01], &SolverConfig::default(), 1).unwrap();
    let row = &table.rows[0];
    assert!(row.note.is_some());
    assert_eq!(row.objective, f64::INFINITY);
    assert_eq!(row.validator_pass, None);
}

#[test]
fn tight_water_needs_the_tank() {
    let study = storage_phenomenon_study(&synthetic::tight_water(), 0.99, &SolverConfig::default()).unwrap();
    assert_eq!(study.full.status, SolveStatus::Optimal);
    assert!(study.full_report.as_ref().unwrap().pass && study.steady_report.as_ref().unwrap().pass);
    assert!(study.water_storage_used, "max level {}", study.full_max_level);
    assert!(study.steady_max_level <= TANK_USE_THRESHOLD);
    assert!(study.steady_gap >= 0.0);
}

#[test]
fn steady_state_bounds_full_mode_from_above() {
    for seed in 0..3 {
        let mut inst = synthetic::random_instance(seed, 24);
        inst.mode = SolveMode::Full;
        let full = common::solve_checked(&inst);
        inst.mode = SolveMode::Steady;
        let steady = common::solve_checked(&inst);
        assert!(steady.objective >= full.objective * (1.0 - 1e-9), "seed {seed}: {} < {}", steady.objective, full.objective);
    }
}
