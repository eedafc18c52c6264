//! MILP modelling layer and a desk-scale solver.
//!
//! [`MilpModel`] is an insertion-ordered, solver-agnostic model; [`export_lp`]
//! writes it in LP format for external solvers, and [`solve_milp`] solves it
//! with a dense primal simplex inside best-bound branch-and-bound.

pub mod branch;
pub mod error;
pub mod lp_format;
pub mod model;
pub mod simplex;

pub use branch::{solve_lp, solve_milp, Branching, LpSolution, MilpSolution, SolveStatus, SolverConfig};
pub use error::{ExportError, ImportError, ModelError, SolveError};
pub use lp_format::{export_lp, format_g17, import_solution, write_solution};
pub use model::{
    Constraint, LinExpr, LintReport, MilpModel, ObjSense, RowId, Sense, SizeReport, VarId, VarKind, VarSpec,
    Variable,
};
