//! Configuration parsing and experiment runners behind the `ibmsim` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, Command, ConfigError, ExperimentConfig, Value};
pub use run::{run, RunOutcome};
