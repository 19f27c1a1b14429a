//! Experiment orchestration for slow normalizing-flow source separation.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod runner;
pub mod traces;

pub use config::{ExperimentConfig, ExperimentKind, IcaFit};
pub use error::CliError;
