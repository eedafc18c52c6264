//! Test-only oracles shared by the solver tests and the acceptance suite.
//! Nothing in here calls into the solver under test.
#![allow(dead_code)]

pub mod lp_reader;

use nexus_milp::{LinExpr, MilpModel, ObjSense, Sense, VarKind, VarSpec};
use rand::Rng;

/// Random LP with `x ≥ 0` and a bounding row so every feasible instance is bounded.
pub fn random_lp<R: Rng>(rng: &mut R, max_vars: usize, max_rows: usize) -> MilpModel {
    loop {
        let n = rng.gen_range(2..=max_vars);
        let m = rng.gen_range(2..=max_rows);
        if binomial(n + m, m) > 60_000 {
            continue;
        }
        let mut model = MilpModel::new("rlp");
        let vars: Vec<_> = (0..n)
            .map(|j| model.add_variable(VarSpec::continuous(format!("x{j}"), 0.0, f64::INFINITY)).unwrap())
            .collect();
        for i in 0..m - 1 {
            let expr = LinExpr::from_terms(vars.iter().map(|&v| (v, round2(rng.gen_range(-5.0..5.0)))));
            let sense = if rng.gen_bool(0.7) { Sense::Le } else { Sense::Ge };
            let rhs = round2(rng.gen_range(-3.0..10.0));
            model.add_constraint(&expr, sense, rhs, format!("r{i}")).unwrap();
        }
        let total = LinExpr::from_terms(vars.iter().map(|&v| (v, 1.0)));
        model.add_constraint(&total, Sense::Le, round2(rng.gen_range(1.0..20.0)), "cap").unwrap();
        let obj = LinExpr::from_terms(vars.iter().map(|&v| (v, round2(rng.gen_range(-10.0..10.0)))));
        model.set_objective(ObjSense::Minimize, &obj).unwrap();
        return model;
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn binomial(n: usize, k: usize) -> usize {
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Minimum over basic feasible solutions of the slack form `[A' I]` (rows flipped to `≤`).
/// Applies to models produced by [`random_lp`]. `None` means infeasible.
pub fn vertex_enumeration(model: &MilpModel) -> Option<f64> {
    let n = model.num_vars();
    let rows: Vec<(Vec<f64>, f64)> = model
        .constraints()
        .map(|(_, c)| {
            let mut a = vec![0.0; n];
            for &(v, coef) in &c.terms {
                a[v.0] = coef;
            }
            match c.sense {
                Sense::Le => (a, c.rhs),
                Sense::Ge => (a.iter().map(|x| -x).collect(), -c.rhs),
                Sense::Eq => panic!("vertex oracle expects inequalities"),
            }
        })
        .collect();
    let m = rows.len();
    let mut cost = vec![0.0; n + m];
    for &(v, c) in &model.objective().terms {
        cost[v.0] = c;
    }
    let column = |j: usize| -> Vec<f64> {
        if j < n {
            rows.iter().map(|r| r.0[j]).collect()
        } else {
            (0..m).map(|i| if i == j - n { 1.0 } else { 0.0 }).collect()
        }
    };
    let cols: Vec<Vec<f64>> = (0..n + m).map(column).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        let mut mat = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            for (k, &j) in subset.iter().enumerate() {
                mat[i][k] = cols[j][i];
            }
            mat[i][m] = b[i];
        }
        if let Some(xb) = gauss_solve(mat) {
            if xb.iter().all(|v| *v >= -1e-9) {
                let obj: f64 = subset.iter().zip(&xb).map(|(&j, v)| cost[j] * v).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        if !next_combination(&mut subset, n + m) {
            break;
        }
    }
    best
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..=m {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][m] / a[i][i]).collect())
}

/// Random pure-binary MILP with small integer data.
pub fn random_binary_milp<R: Rng>(rng: &mut R, max_bins: usize, max_rows: usize) -> MilpModel {
    let n = rng.gen_range(2..=max_bins);
    let m = rng.gen_range(1..=max_rows);
    let mut model = MilpModel::new("rmilp");
    let vars: Vec<_> = (0..n).map(|j| model.add_variable(VarSpec::binary(format!("b{j}"))).unwrap()).collect();
    for i in 0..m {
        let mut expr = LinExpr::new();
        for &v in &vars {
            if rng.gen_bool(0.7) {
                expr.push(v, rng.gen_range(-5i32..=5) as f64);
            }
        }
        let sense = match rng.gen_range(0..10) {
            0 => Sense::Eq,
            1..=6 => Sense::Le,
            _ => Sense::Ge,
        };
        let rhs = rng.gen_range(-4i32..=8) as f64;
        model.add_constraint(&expr, sense, rhs, format!("r{i}")).unwrap();
    }
    let obj = LinExpr::from_terms(vars.iter().map(|&v| (v, rng.gen_range(-10i32..=10) as f64)));
    let sense = if rng.gen_bool(0.5) { ObjSense::Minimize } else { ObjSense::Maximize };
    model.set_objective(sense, &obj).unwrap();
    model
}

/// Exhaustive 2^n search over a pure-binary model. `None` means infeasible.
pub fn enumerate_binary(model: &MilpModel) -> Option<f64> {
    let n = model.num_vars();
    assert!(model.variables().iter().all(|v| v.kind == VarKind::Binary));
    let maximize = model.objective().sense == ObjSense::Maximize;
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    for mask in 0u32..(1u32 << n) {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = ((mask >> j) & 1) as f64;
        }
        if model.max_violation(&x) > 1e-9 {
            continue;
        }
        let obj = model.objective_value(&x);
        best = Some(match best {
            None => obj,
            Some(b) if maximize => b.max(obj),
            Some(b) => b.min(obj),
        });
    }
    best
}
