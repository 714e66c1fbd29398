//! Floating point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the simulation and verification code is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Exact conversion of a sample index.
    #[inline]
    fn from_index(i: usize) -> Self {
        Self::from_usize(i).expect("index representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `sign` with `sign(0) = +1`, the convention the energy controller relies on.
    #[inline]
    fn sign_nonneg(self) -> Self {
        if self >= Self::zero() {
            Self::one()
        } else {
            -Self::one()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
