//! Exact arithmetic: finite fields, `Z/p^2`, polynomials, rational functions
//! with prescribed poles, and (semi)linear algebra.

mod field;
mod linalg;
mod poly;
mod ratfn;
mod w2;

pub use field::{field, Fe, Field, FieldCtx};
pub use linalg::{
    in_span, rank_kernel_image, row_space, solve_linear, span_basis, AffineSolution, LinearSummary,
    Mat, SemilinearMap,
};
pub use poly::{poly_gcd, LaurentPoly, Poly};
pub use ratfn::RatFn;
pub use w2::{W2Poly, W2};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgError {
    #[error("{0} is not an odd prime")]
    BadPrime(u32),
    #[error("unsupported field F_{p}^{m} (need p <= 13, 1 <= m <= 4)")]
    UnsupportedField { p: u32, m: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gcd of two zero polynomials")]
    BothZero,
    #[error("division by zero")]
    DivisionByZero,
    #[error("inexact division")]
    NotDivisible,
    #[error("rational function is not a unit on the allowed set")]
    NotInvertible,
    #[error("parse error: {0}")]
    Parse(String),
}
