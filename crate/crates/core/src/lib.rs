//! Exact-arithmetic toolkit for certifying inequalities between polynomial
//! measures, heights, implicit-function coefficients and multiplicity
//! staircases over the rationals.
//!
//! Everything that can be an exact rational stays an exact rational; only a
//! final logarithm (or an explicitly tagged numeric integral) leaves the
//! exact world, through [`logval::LogValue`] at configurable precision.

pub mod bounds;
pub mod chart;
pub mod exec;
pub mod group;
pub mod implicit;
pub mod localized;
pub mod logval;
pub mod measures;
pub mod places;
pub mod poly;
pub mod roots;
pub mod segre;
mod ser;
pub mod series;
pub mod staircase;
pub mod verdict;

pub use logval::{LogValue, Precision};
pub use places::Place;
pub use poly::{Degree, MultiIndex, SparsePolynomial};
pub use verdict::Verdict;

/// Arbitrary-precision rational, the coefficient type used everywhere.
pub type Rational = num_rational::BigRational;
/// Arbitrary-precision integer.
pub type Int = num_bigint::BigInt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("arity out of range: {0} (supported: 1..=16)")]
    Arity(usize),
    #[error("total degree out of range: {0} (supported: <= 64)")]
    TotalDegree(u32),
    #[error("variable mismatch: {0}")]
    VarMismatch(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
