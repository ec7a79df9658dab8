//! Solver for two-particle multi-time integral equations on Minkowski
//! half-space and FLRW spacetimes.

// `!(x > 0.0)` style guards reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod greens;
pub mod kernels;
pub mod oracle;
pub mod quadrature;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
