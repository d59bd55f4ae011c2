//! Experiment configuration and the pipeline commands behind the `forge`
//! binary.

pub mod commands;
pub mod config;

pub use commands::{cmd_analyze, cmd_extract, cmd_generate, cmd_solve, cmd_train};
pub use config::{ExperimentConfig, Preset};
