//! Coherent-state approximation toolkit for the semiclassical logarithmic
//! Schrodinger equation.

// `!(x > 0.0)` is how parameter checks reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod classical;
pub mod config;
pub mod envelope;
pub mod error;
pub mod field;
pub mod gaussian;
pub mod grid;
pub mod lab;
pub mod potentials;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
