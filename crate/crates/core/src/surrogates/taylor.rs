//! First-order Taylor surrogates for the cascaded system recovery and the
//! permeate flow.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fitting::r_squared;
use super::SurrogateError;
use crate::instance::RoPlantParams;

/// Affine map `value_at_point + gradient·(x − expansion_point)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorSurrogate {
    pub expansion_point: Vec<f64>,
    pub value_at_point: f64,
    pub gradient: Vec<f64>,
}

impl TaylorSurrogate {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.gradient.len());
        let mut v = self.value_at_point;
        for ((g, xi), pi) in self.gradient.iter().zip(x).zip(&self.expansion_point) {
            v += g * (xi - pi);
        }
        v
    }

    /// Constant term of the affine map, `value − gradient·point`.
    pub fn intercept(&self) -> f64 {
        self.value_at_point - self.gradient.iter().zip(&self.expansion_point).map(|(g, p)| g * p).sum::<f64>()
    }
}

fn check_recovery(name: &str, v: f64) -> Result<(), SurrogateError> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(SurrogateError::Domain(format!("{name} = {v} is outside [0, 1)")))
    }
}

/// System recovery of a three-stage cascade where each stage treats the
/// previous stage's retentate.
pub fn wr_sys_exact(wr1: f64, wr2: f64, wr3: f64) -> Result<f64, SurrogateError> {
    check_recovery("wr1", wr1)?;
    check_recovery("wr2", wr2)?;
    check_recovery("wr3", wr3)?;
    Ok(wr1 + (1.0 - wr1) * wr2 + (1.0 - wr1) * (1.0 - wr2) * wr3)
}

/// Gradient of [`wr_sys_exact`].
pub fn wr_sys_gradient(wr1: f64, wr2: f64, wr3: f64) -> [f64; 3] {
    [
        1.0 - wr2 - wr3 + wr2 * wr3,
        1.0 - wr1 - wr3 + wr1 * wr3,
        1.0 - wr1 - wr2 + wr1 * wr2,
    ]
}

pub fn build_wr_sys_taylor(point: [f64; 3]) -> Result<TaylorSurrogate, SurrogateError> {
    let [a, b, c] = point;
    let value = wr_sys_exact(a, b, c)?;
    Ok(TaylorSurrogate { expansion_point: point.to_vec(), value_at_point: value, gradient: wr_sys_gradient(a, b, c).to_vec() })
}

/// Linearization of `Q_p = WR^sys·Q_f` over `(WR^sys, Q_f)` at the nominal
/// operating point. Both coefficients are frozen at the nominal values.
pub fn build_qp_taylor(nominal_qp: f64, nominal_wr_sys: f64) -> Result<TaylorSurrogate, SurrogateError> {
    if !(nominal_wr_sys > 0.0) {
        return Err(SurrogateError::Domain(format!("nominal recovery must be > 0, got {nominal_wr_sys}")));
    }
    let qf = nominal_qp / nominal_wr_sys;
    Ok(TaylorSurrogate {
        expansion_point: vec![nominal_wr_sys, qf],
        value_at_point: nominal_qp,
        gradient: vec![qf, nominal_wr_sys],
    })
}

/// Range of system recovery over which the surrogates are scored.
pub const ACCURACY_WR_SYS_RANGE: (f64, f64) = (0.4, 0.85);

/// Smallest permeate flow [m³/h] over which the permeate surrogate is scored.
pub const ACCURACY_MIN_QP: f64 = 227.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorAccuracy {
    pub wr_sys_samples: usize,
    pub wr_sys_r_squared: f64,
    pub qp_samples: usize,
    pub qp_r_squared: f64,
}

/// Scores both surrogates of `ro` on `samples` points drawn uniformly from
/// the stage recovery and feed boxes. Points with an exact system recovery
/// outside [`ACCURACY_WR_SYS_RANGE`] are dropped; the permeate surrogate is
/// fed the exact recovery and scored where `WR^sys·Q_f ≥ ACCURACY_MIN_QP`.
pub fn taylor_accuracy(ro: &RoPlantParams, samples: usize, rng: &mut impl Rng) -> Result<TaylorAccuracy, SurrogateError> {
    let wr = build_wr_sys_taylor(ro.nominal_point.stages())?;
    let qp = build_qp_taylor(ro.nominal_point.qp, ro.nominal_point.wr_sys)?;
    let (lo, hi) = ACCURACY_WR_SYS_RANGE;
    let (mut wr_true, mut wr_pred, mut qp_true, mut qp_pred) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..samples {
        let x: Vec<f64> = ro.wr_stage_bounds.iter().map(|&(a, b)| rng.gen_range(a..=b)).collect();
        let qf = rng.gen_range(ro.qf_bounds.0..=ro.qf_bounds.1);
        let exact = wr_sys_exact(x[0], x[1], x[2])?;
        if !(lo..=hi).contains(&exact) {
            continue;
        }
        wr_true.push(exact);
        wr_pred.push(wr.evaluate(&x));
        if exact * qf >= ACCURACY_MIN_QP {
            qp_true.push(exact * qf);
            qp_pred.push(qp.evaluate(&[exact, qf]));
        }
    }
    Ok(TaylorAccuracy {
        wr_sys_samples: wr_true.len(),
        wr_sys_r_squared: r_squared(&wr_true, |i| wr_pred[i]),
        qp_samples: qp_true.len(),
        qp_r_squared: r_squared(&qp_true, |i| qp_pred[i]),
    })
}
