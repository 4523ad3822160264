//! Configuration files, experiment orchestration, plots and the CLI.

pub mod cli;
pub mod config;
pub mod io;
pub mod run;
pub mod svg;

pub use config::ExperimentConfig;
