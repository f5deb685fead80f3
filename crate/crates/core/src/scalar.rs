//! Scalar abstraction for belief arithmetic.
//!
//! Beliefs are computed over any type that behaves like a field with an
//! order: `f64` and `f32` for simulation, `BigRational` when exact
//! posteriors are needed (brute-force checks, zero-noise soundness).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A probability-valued scalar.
pub trait Probability:
    Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Lossless-when-possible conversion from a configured `f64` parameter.
    fn from_param(value: f64) -> Self {
        Self::from_f64(value).expect("finite parameter")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits scalar")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Probability for f32 {}
impl Probability for f64 {}

impl Probability for BigRational {
    fn from_count(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
}

/// Exact rational `numer / denom`, convenient for exact likelihood parameters.
pub fn ratio(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}
