//! Scalar abstraction shared by every numerical module.
//!
//! All solvers are generic over [`Real`], which is implemented for `f32` and
//! `f64`. Tolerances quoted in the test suites assume `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a cell count or dimension.
    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Critical Lebesgue exponent `2d/(d+2)`.
#[inline]
pub fn critical_exponent<T: Real>(d: usize) -> T {
    T::from_usize_exact(2 * d) / T::from_usize_exact(d + 2)
}

/// Exponent `4/(d+2)` of the nonlocal diffusion prefactor.
#[inline]
pub fn coefficient_exponent<T: Real>(d: usize) -> T {
    T::lit(4.0) / T::from_usize_exact(d + 2)
}
