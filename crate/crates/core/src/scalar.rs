//! Scalar abstraction shared by the simulation kernels.
//!
//! State evolution, expectation values, feedback laws and the quasi-Newton
//! optimizer are written against [`Real`], so the same code runs in `f32`
//! (fast, ~1e-6 accuracy) or `f64` (the default, used by every acceptance
//! check). Dense eigendecompositions always run in `f64` through nalgebra.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar used by the simulator: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("real scalar converts to f64")
    }

    /// Converts a count or index.
    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("count fits scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a [`Real`] scalar.
pub type Amplitude<T> = Complex<T>;

/// `e^{-i theta}`.
#[inline]
pub(crate) fn phase<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, -s)
}
