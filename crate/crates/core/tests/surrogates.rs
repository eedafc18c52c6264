mod common;

use nexus_core::instance::{PowerCurve, RoPlantParams, TechnologyUnitModel, TimeGrid, TimeSeries};
use nexus_core::surrogates::fitting::{homogeneous_optimum, solve_sub_model};
use nexus_core::surrogates::taylor::wr_sys_gradient;
use nexus_core::surrogates::{
    build_wr_sys_taylor, fit_technology_surrogate, relu_forward, taylor_accuracy, wr_sys_exact, FitOptions, ReluNetwork,
};
use nexus_milp::SolverConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn gradient_matches_central_differences(a in 0.05f64..0.9, b in 0.05f64..0.9, c in 0.05f64..0.9) {
        let h = 1e-5;
        let g = wr_sys_gradient(a, b, c);
        let f = |x: [f64; 3]| wr_sys_exact(x[0], x[1], x[2]).unwrap();
        for i in 0..3 {
            let mut up = [a, b, c];
            let mut dn = [a, b, c];
            up[i] += h;
            dn[i] -= h;
            let fd = (f(up) - f(dn)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6, "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn taylor_is_affine(x in prop::array::uniform3(0.0f64..0.6), d in prop::array::uniform3(-0.2f64..0.2), s in -2.0f64..2.0) {
        let t = build_wr_sys_taylor(RoPlantParams::reference().nominal_point.stages()).unwrap();
        let step = |k: f64| [x[0] + k * d[0], x[1] + k * d[1], x[2] + k * d[2]];
        let (f0, f1, fs) = (t.evaluate(&x), t.evaluate(&step(1.0)), t.evaluate(&step(s)));
        prop_assert!((fs - (f0 + s * (f1 - f0))).abs() <= 1e-12);
    }

    #[test]
    fn taylor_touches_the_exact_map_at_its_point(p in prop::array::uniform3(0.05f64..0.6)) {
        let t = build_wr_sys_taylor(p).unwrap();
        prop_assert!((t.evaluate(&p) - wr_sys_exact(p[0], p[1], p[2]).unwrap()).abs() <= 1e-15);
        // Exact recovery is multilinear and concave along the diagonal, so the
        // tangent plane overestimates along it.
        let q = [p[0] + 0.05, p[1] + 0.05, p[2] + 0.05];
        prop_assert!(t.evaluate(&q) >= wr_sys_exact(q[0], q[1], q[2]).unwrap() - 1e-15);
    }

    #[test]
    fn encoded_network_reproduces_forward_pass(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = common::random_network(&mut rng);
        let bounds: Vec<(f64, f64)> = (0..net.input_dim()).map(|_| (-1.5, 1.5)).collect();
        for _ in 0..4 {
            let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rand::Rng::gen_range(&mut rng, lo..=hi)).collect();
            let want = relu_forward(&net, &x).unwrap();
            let got = common::encoded_output(&net, &bounds, &x);
            prop_assert!((want - got).abs() <= 1e-6, "{want} vs {got}");
        }
    }
}

#[test]
fn ec_network_encoding_is_exact_on_its_box() {
    let net = ReluNetwork::ec_reference();
    let bounds = [(0.0, 1.0); 4];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let x: Vec<f64> = (0..4).map(|_| rand::Rng::gen_range(&mut rng, 0.0..=1.0)).collect();
        let want = relu_forward(&net, &x).unwrap();
        assert!((want - common::encoded_output(&net, &bounds, &x)).abs() <= 1e-6);
    }
}

#[test]
fn sampled_accuracy_is_stable_across_seeds() {
    for seed in 0..5 {
        let acc = taylor_accuracy(&RoPlantParams::reference(), 5_000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert!(acc.wr_sys_r_squared >= 0.95 && acc.qp_r_squared >= 0.95, "{acc:?}");
    }
}

fn wind(sites: Vec<f64>) -> TechnologyUnitModel {
    TechnologyUnitModel {
        name: "wind".into(),
        k_tech: 52_000.0,
        k_land: 400.0,
        area_tech: 0.5,
        area_spacing: 15.0,
        power_curve: PowerCurve::wind_turbine(500.0, 3.0, 12.0, 25.0),
        site_factors: sites,
    }
}

fn breeze(steps: usize) -> TimeSeries {
    TimeSeries((0..steps).map(|t| 6.0 + 4.0 * (t as f64 * 0.7).sin()).collect())
}

/// Cheapest subset of sites whose output reaches the target, by enumeration.
fn cheapest_subset(unit: &TechnologyUnitModel, resource: &TimeSeries, target: f64) -> Option<f64> {
    let energies: Vec<f64> = unit.site_factors.iter().map(|&f| unit.unit_profile(resource, f).sum()).collect();
    let unit_cost = unit.k_tech + unit.k_land * unit.area_per_unit();
    (0u32..1 << energies.len())
        .filter(|m| (0..energies.len()).filter(|i| m & (1 << i) != 0).map(|i| energies[i]).sum::<f64>() >= target)
        .map(|m| m.count_ones() as f64 * unit_cost)
        .min_by(f64::total_cmp)
}

#[test]
fn sub_model_matches_enumeration_on_mixed_sites() {
    let unit = wind(vec![0.6, 0.8, 0.9, 1.0, 1.1, 1.3, 1.5]);
    let resource = breeze(24);
    let max: f64 = unit.site_factors.iter().map(|&f| unit.unit_profile(&resource, f).sum()).sum();
    for k in 1..=9 {
        let target = max * k as f64 / 10.0;
        let got = solve_sub_model(&unit, &resource, 1.0, target, &SolverConfig::default()).unwrap();
        let want = cheapest_subset(&unit, &resource, target).unwrap();
        common::assert_close(got.cost, want, 1e-9);
        assert!(got.fleet_energy >= target * (1.0 - 1e-9));
    }
}

#[test]
fn homogeneous_optimum_is_a_ceiling() {
    let unit = wind(vec![1.0; 12]);
    let resource = breeze(24);
    let per_unit = unit.unit_profile(&resource, 1.0).sum();
    for k in 1..=12 {
        let target = per_unit * (k as f64 - 0.5);
        let closed = homogeneous_optimum(&unit, &resource, 1.0, target).unwrap();
        assert_eq!(closed.units, k);
        let milp = solve_sub_model(&unit, &resource, 1.0, target, &SolverConfig::default()).unwrap();
        assert_eq!(milp.units, k);
    }
}

#[test]
fn homogeneous_fit_is_tight() {
    let unit = wind(vec![1.0; 20]);
    let grid = TimeGrid::hourly(48);
    let resource = breeze(48);
    let max = unit.unit_profile(&resource, 1.0).sum() * 20.0;
    let targets: Vec<f64> = (1..=10).map(|k| max * k as f64 / 10.0).collect();
    let report = fit_technology_surrogate(&unit, &resource, grid, &targets, &FitOptions::default()).unwrap();
    assert!(report.surrogate.r_squared_cost >= 0.97 && report.surrogate.r_squared_land >= 0.97);
    assert_eq!(report.points.len(), 10);
}
