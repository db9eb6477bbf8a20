//! Harness for the percolation lab: experiment configs, the run
//! orchestrator, result persistence, and deterministic SVG plots.

pub mod config;
pub mod error;
pub mod plot;
pub mod runner;
pub mod store;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::HarnessError;
pub use runner::{run, RunOverrides};
pub use store::ResultStore;
