//! Configuration, orchestration and file output.
//!
//! Runs are driven by a JSON [`RunConfig`]. Every output byte is a function
//! of the config and the master seed: per-path noise streams are derived
//! from `(seed, path index, component)` and parallel results are reduced in
//! index order.

mod config;
mod ensemble;
mod io;
mod run;
mod studies;

pub use config::{
    check_ladder, ComponentConfig, ConvergenceConfig, ConvergenceMode, DiagnosticsConfig, EnsembleConfig,
    GridConfig, InitialCondition, PicardSection, RunConfig, RunKind, Setup, SCHEMA_VERSION,
};
pub use ensemble::{run_ensemble, EnsembleReport, PathOutcome, PathStatus, QuantileSummary};
pub use io::OutputDir;
pub use run::{run, run_file, RunOptions, RunOutcome};
pub use studies::{convergence_study, picard_study, ConvergenceTable, PicardStudy, EXACT_FLOOR};
