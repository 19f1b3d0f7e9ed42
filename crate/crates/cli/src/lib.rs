//! Experiment driver for multi-fidelity bandit simulations: configuration,
//! the `run`/`analyze`/`plotdata` commands and their file formats.

pub mod analyze;
pub mod config;
pub mod error;
pub mod plotdata;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Overrides};
pub use error::CliError;
