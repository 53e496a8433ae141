//! Truncated power series in one and two variables.
//!
//! Every series carries a truncation `trunc`: all coefficients of (weighted)
//! degree `<= trunc` are known, nothing above is. Exact polynomials use
//! [`EXACT`]. Sums and products carry the smaller of the two
//! truncations; derivatives lower the truncation by the weight of the
//! variable.

mod laurent;
mod series1;
mod series2;

pub use laurent::Laurent1;
pub use series1::Series1;
pub use series2::{Monomial, Series2, Weights};

use thiserror::Error;

/// Truncation marker for exact (finite) polynomials.
pub const EXACT: i64 = i64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("weight mismatch: {0:?} vs {1:?}")]
    WeightMismatch(Weights, Weights),
    #[error("inner series has a nonzero constant term")]
    NonzeroConstant,
    #[error("series is not invertible (vanishing constant term)")]
    NotUnit,
    #[error("series is zero within its truncation")]
    ZeroSeries,
    #[error("need coefficients up to order {needed}, series is only known to {available}")]
    InsufficientOrder { needed: i64, available: i64 },
    #[error("operation produces an infinite series; truncate the operand first")]
    Unbounded,
    #[error("series is not divisible by the requested power of the variable")]
    NotDivisible,
}

pub(crate) fn tadd(a: i64, b: i64) -> i64 {
    if a == EXACT || b == EXACT {
        EXACT
    } else {
        a.saturating_add(b).min(EXACT - 1)
    }
}

pub(crate) fn tsub(a: i64, b: i64) -> i64 {
    if a == EXACT {
        EXACT
    } else {
        a - b
    }
}
