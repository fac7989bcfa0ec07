//! Shaft power prediction for cargo vessels.
//!
//! Three predictors share one data pipeline:
//!
//! - **EF**: empirical resistance formulas (calm water, wind, waves) whose seven
//!   coefficients are fitted to measured shaft power ([`ef_fit`]).
//! - **NN**: a branched dense network trained on mean absolute error ([`nn`]).
//! - **PGNN**: the same network with an extra loss term pulling predictions
//!   towards the EF estimate, weighted by `lambda`.
//!
//! A multiplicative polynomial RPM model ([`rpm_poly`]) supplies predicted shaft
//! RPM as a network input, and [`synth`] generates voyages from known ground
//! truth so every fitting routine can be checked against an oracle.

// Validation deliberately writes `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod ef_fit;
pub mod error;
pub mod experiment;
pub mod features;
pub mod format;
pub mod metrics;
pub mod nn;
pub mod physics;
pub mod rpm_poly;
pub mod synth;

pub use error::{Error, Result};
