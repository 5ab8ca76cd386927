//! Finite volume solver for scalar balance laws on a Schwarzschild background.
//!
//! The crate provides the explicit scheme and its monotone fluxes, a characteristics
//! oracle with steady states, discrete entropy diagnostics, an experiment harness and
//! a config-driven command line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod quadrature;
pub mod scheme;

pub use error::{Error, Result};
