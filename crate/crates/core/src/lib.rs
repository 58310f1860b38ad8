//! Numerical laboratory for two-dimensional branching Brownian motion whose
//! branching rate depends on the angle of the particle.
//!
//! The crate is organised by subsystem:
//!
//! * [`model`] holds the model parameters, branching-rate families and every
//!   closed-form constant (κ, ϑ₁, ϑ₂, the centering `m(t)` and friends).
//! * [`spectral`] solves `-f'' + q|x|^α f = λ f` on the line.
//! * [`pde`] evolves the time-singular killed heat equation, builds the
//!   barrier pair `q_*`, `q^*` and runs the Galerkin coefficient ODE.
//! * [`kernel`] estimates the weighted Brownian kernels by Monte Carlo.
//! * [`sim`] contains the exact particle simulators.
//! * [`harness`] is the experiment runner behind the command-line tool.
//!
//! Data-parallel loops (Monte Carlo chunks, replicate fan-out, ladder cells)
//! go through [`exec`], which uses rayon when the `parallel` feature is on and
//! falls back to plain iteration otherwise. Results never depend on the
//! execution mode.

// Negated comparisons are how NaN inputs get rejected alongside out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod error;
pub mod exec;
pub mod harness;
pub mod kernel;
pub mod model;
pub mod numeric;
pub mod pde;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{DerivedConstants, ModelParams, RateFamily};
pub use spectral::EigenSystem;
