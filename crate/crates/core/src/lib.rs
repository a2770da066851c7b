//! Bayesian fault-tolerant control for systems with unreliable sensors.
//!
//! The crate is organised around the closed loop it simulates:
//!
//! - [`plants`]: discrete-time cruise-control and 2-DOF manipulator models
//!   with noisy, redundant sensors.
//! - [`faults`]: freeze / drift / injection sensor faults and Poisson fault
//!   schedules with ground-truth labels.
//! - [`controllers`]: the unbiased active-inference controller (free-energy
//!   gradient descent) and the Bayesian controller (joint NLL minimisation
//!   over state, next state and action).
//! - [`precision`]: online sensor-precision learning, either as a point
//!   estimate or as a conjugate Gamma / Wishart posterior.
//! - [`detection`]: SER and EF-FDI residuals, the beta residual, logistic
//!   classification and ROC analysis.
//! - [`harness`]: scenarios, ensembles, merit tables and residual corpora.
//!
//! See the `examples/` directory for one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod detection;
pub mod error;
pub mod faults;
pub mod harness;
pub mod linalg;
pub mod plants;
pub mod precision;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
