//! Experiment orchestration for the evaluator benchmark: configuration, test enumeration,
//! sequential and parallel execution with caching and recovery, and report generation.

pub mod cache;
pub mod config;
pub mod executor;
pub mod reports;
pub mod store;

pub use config::{ConfigError, ExperimentConfig};
pub use executor::{enumerate_tests, run_experiment, Counts, Mode, RunContext};
pub use store::{TestRecord, Workspace};
