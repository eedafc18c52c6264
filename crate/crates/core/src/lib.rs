//! Energy-water nexus planning: instance data, surrogate models, MILP
//! formulation, solution checking and ε-constraint studies.

pub mod builder;
pub mod config;
pub mod instance;
pub mod solution;
pub mod surrogates;
pub mod sweep;
pub mod synthetic;
pub mod validator;

pub use builder::{build, BuildArtifacts, BuildError, Registry};
pub use instance::{NexusInstance, SolveMode, TimeGrid, TimeSeries, WaterBasis};
pub use solution::{solve_instance, PipelineError, Solution};
pub use validator::{check_solution, ValidationReport};
