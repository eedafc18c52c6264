//! Surrogate models: Taylor expansions for recovery and permeate, the EC
//! ReLU network with its MILP encoding, and fitted technology lines.

pub mod fitting;
pub mod relu;
pub mod taylor;

use nexus_milp::{ModelError, SolveError};
use thiserror::Error;

pub use fitting::{fit_technology_surrogate, per_unit_surrogate, FitOptions, FitReport, SubModelResult};
pub use relu::{encode_relu_milp, encode_relu_standalone, relu_forward, Layer, NodeBigM, ReluFragment, ReluNetwork};
pub use taylor::{build_qp_taylor, build_wr_sys_taylor, taylor_accuracy, wr_sys_exact, TaylorAccuracy, TaylorSurrogate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid network: {0}")]
    Network(String),
    #[error("input {0} has an infinite bound; big-M constants would be infinite")]
    UnboundedInput(usize),
    #[error("at least 3 distinct targets are required, got {0}")]
    TooFewTargets(usize),
    #[error("target {target} kWh exceeds the maximum achievable output {max_achievable} kWh")]
    InfeasibleTarget { target: f64, max_achievable: f64 },
    #[error("all targets lead to the same fleet; widen the target range")]
    DegenerateFit,
    #[error("sub-model solve failed: {0}")]
    SubModel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
