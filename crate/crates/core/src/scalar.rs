//! Scalar abstraction shared by the numeric modules.
//!
//! Plant physics, fault injection, the PUF numerics and the verifier are
//! written against [`Scalar`] so they run in `f32` or `f64`. The harness and
//! wire formats pin `f64` through the aliases exported at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal or intermediate into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Clamps into `[lo, hi]`; NaN maps to `lo`.
    #[inline]
    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        if self.is_nan() || self < lo {
            lo
        } else if self > hi {
            hi
        } else {
            self
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Rounds half away from zero to the nearest integer.
pub fn round_to_i64<T: Scalar>(x: T) -> i64 {
    x.round()
        .to_i64()
        .unwrap_or(if x > T::zero() { i64::MAX } else { i64::MIN })
}
