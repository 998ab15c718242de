//! Floating-point abstraction for the solver core.
//!
//! Everything numeric in this crate is generic over [`Scalar`] so the same
//! code runs in `f32` and `f64`. The concrete aliases used by the CLI live
//! at the crate root.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar usable throughout the solver: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + rustfft::FftNum
    + std::fmt::Display
    + std::fmt::LowerExp
{
    /// Shorthand for lossless conversion of an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal conversion")
    }

    /// Conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Free-function form of [`Scalar::lit`]; keeps call sites short.
pub fn lit<T: Scalar>(x: f64) -> T {
    T::lit(x)
}
