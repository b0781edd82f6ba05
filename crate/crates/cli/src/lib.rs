//! Configuration-driven experiment runner for the Bohmian qubit model.

pub mod config;
pub mod run;
pub mod validate;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use run::{run, Manifest, RunError};
pub use validate::{validate, Diagnostic, Level};
