//! Experiment driver for the Isobe–Kakinuma lab: TOML configs, δ sweeps,
//! CSV/summary reports with pass/fail checks.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod report;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::{run_experiment, ExperimentError};
pub use report::ExperimentReport;
