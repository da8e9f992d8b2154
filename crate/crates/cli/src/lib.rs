//! Experiment harness: dataset generation, single fits, the multi-instance
//! replication study and convergence analysis, each writing plain CSV, JSON
//! and SVG files.

pub mod commands;
pub mod config;
mod error;
pub mod plot;

pub use config::{AlgorithmKind, ExperimentConfig, InitSpec, ModelSource, Overrides};
pub use error::{exit, HarnessError, Result};
