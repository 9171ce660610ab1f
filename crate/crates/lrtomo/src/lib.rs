//! Files, phantoms and experiment drivers around `lrtomo-core`.

pub mod config;
pub mod experiment;
pub mod formats;
pub mod pgm;
pub mod phantoms;

pub use config::{Overrides, SolverKind};
pub use experiment::{Command, ExperimentConfig, RunError, SolverSpec};
