#![allow(dead_code)]

use std::path::PathBuf;

use nexus_core::instance::NexusInstance;
use nexus_core::solution::{solve_instance, Solution};
use nexus_core::validator::check_solution;
use nexus_milp::SolverConfig;

pub const TOL: f64 = 1e-6;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Solves and insists the validator accepts the result.
pub fn solve_checked(inst: &NexusInstance) -> Solution {
    let sol = solve_instance(inst, &SolverConfig::default()).expect("build and solve");
    assert!(sol.has_values(), "{}: status {:?}", inst.name, sol.status);
    let report = check_solution(inst, &sol, TOL).expect("validator runs");
    assert!(report.pass, "{}: flagged {:?}", inst.name, report.flagged_names());
    sol
}

pub fn assert_close(a: f64, b: f64, rel: f64) {
    assert!((a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0), "{a} vs {b}");
}

/// Random network with at most three layers and eight hidden nodes.
pub fn random_network(rng: &mut impl rand::Rng) -> nexus_core::surrogates::ReluNetwork {
    use nexus_core::surrogates::{Layer, ReluNetwork};
    let inputs = rng.gen_range(1..=4);
    let hidden_layers = rng.gen_range(1..=2);
    let mut widths = vec![inputs];
    let mut budget = 8;
    for _ in 0..hidden_layers {
        let w = rng.gen_range(1..=budget.min(5));
        budget -= w;
        widths.push(w);
        if budget == 0 {
            break;
        }
    }
    widths.push(1);
    let layers = widths
        .windows(2)
        .map(|w| Layer {
            weights: (0..w[1]).map(|_| (0..w[0]).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect(),
            biases: (0..w[1]).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        })
        .collect();
    ReluNetwork { layers }
}

/// Output of the big-M encoding with every input pinned to `input`.
pub fn encoded_output(net: &nexus_core::surrogates::ReluNetwork, bounds: &[(f64, f64)], input: &[f64]) -> f64 {
    use nexus_milp::{solve_milp, LinExpr, ObjSense, SolveStatus};
    let (mut model, xs, frag) = nexus_core::surrogates::encode_relu_standalone(net, bounds).unwrap();
    for (&x, &v) in xs.iter().zip(input) {
        model.set_bounds(x, v, v).unwrap();
    }
    model.set_objective(ObjSense::Minimize, &LinExpr::term(frag.output(), 1.0)).unwrap();
    let sol = solve_milp(&model, &SolverConfig::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    sol.values[frag.output().0]
}
