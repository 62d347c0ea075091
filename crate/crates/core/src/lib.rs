//! Multilevel quasi-Monte Carlo estimation of the expected smallest
//! eigenvalue of elliptic eigenproblems with affine random coefficients.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod discretization;
pub mod eigen;
pub mod error;
pub mod estimators;
pub mod fem;
pub mod mesh;
pub mod problems;
pub mod qmc;
pub mod sparse;

pub use error::{Error, Result};
