//! Scalar abstractions.
//!
//! Continuous math (measures, dynamics, costs, MPC, bounds) is written against
//! [`Real`], a thin extension of [`num_traits::Float`]. The LP solver and the
//! product form of the performance bound only need field arithmetic and an
//! ordering, so they are generic over [`LpScalar`], which is also implemented
//! for exact rationals.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal. Every finite `f64` is representable (possibly rounded).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits a float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered field used by the simplex solver.
///
/// `pivot_tolerance` is the magnitude below which a tableau entry counts as
/// zero: zero for exact types, a small multiple of machine epsilon for floats.
pub trait LpScalar:
    Clone + Num + Signed + PartialOrd + FromPrimitive + ToPrimitive + Debug
{
    fn pivot_tolerance() -> Self;

    /// Slack allowed when re-verifying a returned point against the constraints.
    fn feasibility_tolerance() -> Self;

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::pivot_tolerance()
    }
}

impl LpScalar for f64 {
    fn pivot_tolerance() -> Self {
        1e-11
    }
    fn feasibility_tolerance() -> Self {
        1e-9
    }
}

impl LpScalar for f32 {
    fn pivot_tolerance() -> Self {
        1e-5
    }
    fn feasibility_tolerance() -> Self {
        1e-4
    }
}

impl LpScalar for BigRational {
    fn pivot_tolerance() -> Self {
        BigRational::zero()
    }
    fn feasibility_tolerance() -> Self {
        BigRational::zero()
    }
}

/// Exact rational from a ratio of integers.
pub fn rational(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Pairwise (cascade) summation over a slice in its given order.
///
/// The reduction tree depends only on the slice length, so the result is
/// bit-stable for a fixed input order.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(x)` over `values`, without allocating.
pub fn pairwise_sum_by<T: Real>(values: &[T], f: &impl Fn(T) -> T) -> T {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().fold(T::zero(), |acc, &v| acc + f(v));
    }
    let mid = values.len() / 2;
    pairwise_sum_by(&values[..mid], f) + pairwise_sum_by(&values[mid..], f)
}

/// Formats a float with 17 significant digits in locale-independent scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
