//! Scalar abstractions.
//!
//! The floating-point machinery (distributions, quadrature, payoffs, the
//! simulator) is written against [`Real`], implemented for `f32` and `f64`.
//! Combinatorial identities and the coefficient-vector algebra are written
//! against [`Field`], which additionally admits exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// An ordered field with exact integer embedding.
pub trait Field: Clone + PartialOrd + Debug + Num + Neg<Output = Self> {
    /// Build `num / den` in this field (for floats, one rounding step).
    fn from_ratio(num: &BigInt, den: &BigInt) -> Self;

    fn from_int(i: i64) -> Self {
        Self::from_ratio(&BigInt::from(i), &BigInt::from(1))
    }

    /// Whether arithmetic in this field is exact.
    fn is_exact() -> bool;

    fn approx_f64(&self) -> f64;

    /// Equality up to `tol` for inexact fields, exact equality otherwise.
    fn near(&self, other: &Self, tol: f64) -> bool {
        if Self::is_exact() {
            self == other
        } else {
            (self.approx_f64() - other.approx_f64()).abs() <= tol
        }
    }
}

macro_rules! float_field {
    ($t:ty) => {
        impl Field for $t {
            fn from_ratio(num: &BigInt, den: &BigInt) -> Self {
                let r = BigRational::new(num.clone(), den.clone());
                r.to_f64().map(|x| x as $t).unwrap_or(<$t>::NAN)
            }
            fn is_exact() -> bool {
                false
            }
            fn approx_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_field!(f32);
float_field!(f64);

impl Field for BigRational {
    fn from_ratio(num: &BigInt, den: &BigInt) -> Self {
        BigRational::new(num.clone(), den.clone())
    }
    fn is_exact() -> bool {
        true
    }
    fn approx_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.to_f64().unwrap_or_else(|| {
            if self.is_negative() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        })
    }
}

/// Floating-point scalar used by every numerical routine in the crate.
pub trait Real:
    Field + Float + FloatConst + FromPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Literal conversion from `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
