//! Config-driven experiment runner for `trapwalk-core`.
//!
//! Each experiment splits into independent cells that run on a rayon pool.
//! Every cell draws from its own seed stream derived from the master seed,
//! and results are merged in cell order, so the output does not depend on
//! the number of workers.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentSpec, Format, ModelSpec, SCHEMA_VERSION};
pub use error::CliError;
pub use report::{Check, Report, Table};
pub use runner::{replay, run, run_with_workers, Cancel, ReplayOutcome, WORKERS_ENV};
