//! Spectral and ideal Bose gas toolkit for the pure hopping model on
//! perturbed homogeneous Cayley trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] builds tree balls and their perturbations along a base subtree;
//! * [`spectral`] holds the sparse eigen, resolvent and time-evolution solvers;
//! * [`krein`] evaluates the analytic tree kernels and the secular problem that
//!   locates the norm of the infinite perturbed graph;
//! * [`pf`] gives closed-form Perron-Frobenius weights and their finite-volume
//!   diagnostics;
//! * [`ids`] computes integrated densities of states;
//! * [`thermo`] layers Bose-Einstein statistics on top;
//! * [`config`], [`report`] and [`pipeline`] drive batch runs from the CLI.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csr;
mod dense;
pub mod error;
pub mod graph;
pub mod ids;
pub mod krein;
pub mod pf;
pub mod pipeline;
pub mod report;
pub mod spectral;
pub mod thermo;

pub use error::{Error, Result};

/// Version string stamped into every report header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
