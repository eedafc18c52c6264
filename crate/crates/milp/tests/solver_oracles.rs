mod support;

use nexus_milp::{solve_lp, solve_milp, Branching, MilpModel, Sense, SolveStatus, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = SolverConfig::default();
    let mut infeasible = 0;
    for case in 0..100 {
        let model = support::random_lp(&mut rng, 10, 10);
        let oracle = support::vertex_enumeration(&model);
        let lp = solve_lp(&model, &cfg).unwrap();
        match oracle {
            None => {
                infeasible += 1;
                assert_eq!(lp.status, SolveStatus::Infeasible, "case {case}");
            }
            Some(best) => {
                assert_eq!(lp.status, SolveStatus::Optimal, "case {case}");
                assert!((lp.objective - best).abs() <= 1e-6 * best.abs().max(1.0), "case {case}: {} vs {best}", lp.objective);
                assert!(model.max_violation(&lp.values) <= 1e-7, "case {case}");
            }
        }
    }
    assert!(infeasible < 100);
}

fn dual_objective(model: &MilpModel, duals: &[f64], reduced: &[f64]) -> f64 {
    let mut obj = 0.0;
    for ((_, c), &y) in model.constraints().zip(duals) {
        if y.abs() < 1e-12 {
            continue;
        }
        let active = match c.sense {
            Sense::Eq => c.rhs,
            Sense::Ge => {
                assert!(y > -1e-9, "wrong dual sign on >= row");
                c.rhs
            }
            Sense::Le => {
                assert!(y < 1e-9, "wrong dual sign on <= row");
                c.rhs
            }
        };
        obj += y * active;
    }
    for (v, &d) in model.variables().iter().zip(reduced) {
        if d.abs() < 1e-12 {
            continue;
        }
        let bound = if d > 0.0 { v.lower } else { v.upper };
        assert!(bound.is_finite(), "reduced cost pushes {} toward an infinite bound", v.name);
        obj += d * bound;
    }
    obj
}

#[test]
fn strong_duality_on_optimal_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = SolverConfig::default();
    let mut checked = 0;
    while checked < 50 {
        let model = support::random_lp(&mut rng, 8, 8);
        let lp = solve_lp(&model, &cfg).unwrap();
        if lp.status != SolveStatus::Optimal {
            continue;
        }
        let dual = dual_objective(&model, &lp.duals, &lp.reduced_costs);
        assert!((dual - lp.objective).abs() <= 1e-6 * lp.objective.abs().max(1.0), "{dual} vs {}", lp.objective);
        checked += 1;
    }
}

#[test]
fn random_milps_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = SolverConfig::default();
    let mut feasible = 0;
    for case in 0..100 {
        let model = support::random_binary_milp(&mut rng, 12, 10);
        let oracle = support::enumerate_binary(&model);
        let sol = solve_milp(&model, &cfg).unwrap();
        match oracle {
            None => assert_eq!(sol.status, SolveStatus::Infeasible, "case {case}"),
            Some(best) => {
                feasible += 1;
                assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
                assert_eq!(sol.objective.round(), best, "case {case}");
                assert!((sol.objective - best).abs() < 1e-6);
                assert!(model.max_violation(&sol.values) <= 1e-7);
                assert!(sol.values.iter().all(|v| *v == 0.0 || *v == 1.0));
            }
        }
    }
    assert!(feasible > 30, "generator produced too few feasible instances ({feasible})");
}

#[test]
fn pseudo_cost_branching_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cfg = SolverConfig { branching: Branching::PseudoCost, ..SolverConfig::default() };
    for _ in 0..30 {
        let model = support::random_binary_milp(&mut rng, 10, 8);
        let oracle = support::enumerate_binary(&model);
        let sol = solve_milp(&model, &cfg).unwrap();
        assert_eq!(sol.status.has_solution(), oracle.is_some());
        if let Some(best) = oracle {
            assert!((sol.objective - best).abs() < 1e-6);
        }
    }
}

#[test]
fn deterministic_and_monotone_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SolverConfig { seed: 42, ..SolverConfig::default() };
    for _ in 0..20 {
        let model = support::random_binary_milp(&mut rng, 12, 10);
        let a = solve_milp(&model, &cfg).unwrap();
        let b = solve_milp(&model, &cfg).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        for w in a.bound_trace.windows(2) {
            assert!(w[1] >= w[0], "global bound decreased: {w:?}");
        }
    }
}
