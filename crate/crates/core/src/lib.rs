//! Stochastic trust-region (STR) and stochastic adaptive cubic regularization
//! (SARC) for finite-sum nonconvex minimization
//!
//! ```text
//! min_x f(x) = (1/n) Σ_i f_i(x)
//! ```
//!
//! Gradients, Hessians and function values are all estimated on uniform
//! random subsets of the components. Sample sizes come from Bernstein-type
//! bounds (see [`sampling`]) or from a fixed/growing batch schedule, and the
//! acceptance ratio is corrected for the function-value sampling error before
//! the step is accepted.
//!
//! The crate is organised bottom-up:
//!
//! * [`problem`]: finite sums, exact full-sum references and seeded generators.
//! * [`sampling`]: subset draws, sample-size formulas, subsampled estimators.
//! * [`subproblem`]: quadratic/cubic models and their step solvers.
//! * [`trust_region`] and [`cubic`]: the two outer solvers.
//! * [`certify`]: per-iteration checks of the decrease and gap bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cubic;
pub mod problem;
pub mod rng;
pub mod sampling;
pub mod subproblem;
pub mod trace;
pub mod trust_region;

mod driver;
mod error;

pub use error::{Error, Result};
pub use problem::{Components, FiniteSumProblem, ProblemConstants};
pub use rng::SeedPath;
pub use sampling::{SampleKind, SamplePlan, SampleSet, SamplingPolicy};
pub use subproblem::{CubicModel, QuadraticModel, StepMethod, StepOutcome};
pub use trace::{ExactDiagnostics, IterationRecord, SolveReport, SolveStatus};

pub use cubic::{sarc_solve, NoiseTerm, SarcConfig};
pub use trust_region::{str_solve, StrConfig};

/// Dense column vector used for iterates and gradients.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for Hessians.
pub type Matrix = nalgebra::DMatrix<f64>;
