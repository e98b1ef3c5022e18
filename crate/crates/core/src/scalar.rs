//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating point scalar: `f32` or `f64`.
///
/// Everything in the crate is generic over this trait. Accuracy targets quoted
/// in the docs refer to `f64`; `f32` runs the same algorithms with tolerances
/// scaled by [`Real::tolerance_floor`].
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Debug + Display + LowerExp + Default
{
    /// Converts an `f64` literal, panicking only for values not representable at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest relative tolerance that is meaningful for this type, roughly
    /// a hundred ulps.
    #[inline]
    fn tolerance_floor() -> Self {
        Self::epsilon() * Self::lit(100.0)
    }

    /// `max(tol, tolerance_floor())`.
    #[inline]
    fn tol(tol: f64) -> Self {
        let t = Self::from_f64(tol).unwrap_or_else(Self::zero);
        t.max(Self::tolerance_floor())
    }
}

impl Real for f32 {}
impl Real for f64 {}
