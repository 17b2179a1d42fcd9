//! Batch front-end: scenario files in, CSV and JSON artifacts out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{
    run_baseline, run_monte_carlo, run_staf, run_wrtr, BaselineMethod, Run, RunOptions, RunReport,
};
pub use config::Scenario;
pub use error::{CliError, CliResult};
