//! Time integrators: the first-order Lie splitting and the second-order Strang
//! splitting with SDIRK2 sub-steps, on top of a cached implicit linear operator.

mod config;
mod operator;
mod run;
mod spectral;
mod step;

pub use config::{Order, SchemeConfig, SolverChoice, GAMMA};
pub use operator::{assemble_linear, Backend, LinearStepOperator, OperatorKey, SystemLayout};
pub use run::{run, Observer, RunOutcome, RunSummary, StepView, DIVERGENCE_THRESHOLD};
pub use spectral::SpectralSolver;
pub use step::{
    linear_step, nonlinear_step, sdirk2_substep, Integrator, StepOutput, SubstepKind,
};
