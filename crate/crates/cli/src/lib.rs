//! Experiment harness: config files, run modes, result CSVs and comparison.

pub mod compare;
pub mod config;
pub mod output;
pub mod run;

pub use compare::{compare, Comparison, MethodSummary};
pub use config::{ConfigError, ExperimentConfig, Mode};
pub use run::{rerun, run, run_file, Manifest, RunOptions};
