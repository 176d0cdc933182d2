//! Work extraction from quantum states that are known only through the
//! statistics of one coarse-grained projective measurement.
//!
//! The crate covers plain and asymptotic ergotropy, Boltzmann and
//! observational ergotropy, Monte-Carlo simulation of the randomized
//! extraction protocols, and a spinless-fermion chain whose local energies
//! serve as the measurement.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod coarse;
pub mod ergotropy;
pub mod error;
pub mod linalg;
pub mod output;
pub mod protocol;
pub mod state;

pub use error::{Error, Result};
