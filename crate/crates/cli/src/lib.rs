//! Experiment runner and dataset preparation for the `debias` binary.

pub mod config;
pub mod error;
pub mod prepare;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use report::ExperimentReport;
