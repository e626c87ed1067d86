//! Rigorous Hausdorff dimension brackets for the invariant sets of
//! continued-fraction iterated function systems `x -> 1/(x + b)`.
//!
//! The transfer operator is discretised by continuous piecewise polynomial
//! collocation at extended Chebyshev points; the spectral radius of the
//! resulting matrix is enclosed through a cone of log-Lipschitz vectors, and a
//! set of a-priori constants turns those enclosures into a certified bracket
//! for the dimension.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dd;
pub mod domain;
mod error;
pub mod ifs;
pub mod real;
pub mod report;
pub mod solver;
pub mod transfer;

pub use dd::DoubleDouble;
pub use error::{Error, Result};
pub use real::Real;
