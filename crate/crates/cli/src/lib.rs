//! Experiment harness for the `strarc` solvers: JSON configs, a parallel
//! cell runner, per-cell trace CSVs, summaries and plot data.

pub mod certify;
pub mod config;
pub mod plot;
pub mod run;

pub use config::{Batching, Cell, ExperimentConfig, MethodKind, SchemeSpec, SolverChoice};
pub use run::{run_experiment, RunSummary};
