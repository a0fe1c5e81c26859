//! Gradient tracking with periodic global averaging (GT-PGA) for decentralized
//! stochastic nonconvex optimization.
//!
//! - [`topology`]: graph families, Metropolis mixing matrices, spectral gap.
//! - [`problem`]: the regularized least-squares benchmark and its gradient oracles.
//! - [`engine`]: GT-PGA and DGD over a synchronous round model.
//! - [`metrics`]: stationarity, consensus, and tracking diagnostics.
//! - [`theory`]: stepsize conditions and rate bounds.
//! - [`harness`]: configuration, sweeps, CSV output, and the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod rng;
pub mod theory;
pub mod topology;

pub use engine::{run, Algorithm, NetworkState, RunConfig, StepSize, Trajectory};
pub use metrics::MetricRecord;
pub use problem::{generate_dataset, DataSpec, Dataset, LocalObjectives, NoiseModel, Regularizer};
pub use topology::{build_topology, metropolis_weights, MixingMatrix, Period, TopologyKind};
