//! Continuum Gaussian percolation laboratory.
//!
//! Synthesizes stationary Gaussian fields by white-noise convolution,
//! analyzes their excursion sets (component labeling, box events, crossing
//! probes), computes chemical distances on the occupancy graph, and runs the
//! renormalization / stochastic-domination pipeline on coarse-grained site
//! configurations. The `harness` module ties everything into reproducible,
//! manifest-tracked experiments.

pub mod chem;
pub mod renorm;
pub mod error;
pub mod excursion;
pub mod fft;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod rng;
pub mod stats;
pub mod unionfind;

pub use error::CoreError;
pub use grid::{FieldKind, Grid, GridField};
pub use kernel::{make_kernel, Kernel, KernelKind};
pub use rng::RngState;
