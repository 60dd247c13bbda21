//! Simulation workbench for the total error of machine-learning based
//! statistics.
//!
//! The crate realizes finite populations from generative super-populations,
//! draws probability samples, injects measurement and representation errors,
//! fits CART models, forms the CART-assisted difference estimator of a
//! population total, calibrates rare-event classifier scores and decomposes
//! Monte Carlo error by source.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cart;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod measurement;
pub mod numeric;
pub mod population;
pub mod representativity;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};

/// Identifier of a population unit. Realized populations number their units
/// `1..=N`.
pub type UnitId = u64;
