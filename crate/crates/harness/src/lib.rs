//! Experiment harness for tddlab: configuration files, deterministic
//! parallel sweeps, step-size tuning, CSV tables, SVG charts and the oracle
//! report.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod report;
pub mod runner;
pub mod svg;

pub use config::{ExperimentConfig, GridPoint, Overrides};
pub use error::{HarnessError, Result};
pub use runner::{cell_seed, run_grid, run_single, run_sweep, with_workers, SweepOutcome, TaskContext};
