//! Scalar abstraction shared by every numerical module.
//!
//! All linear algebra in this crate is written against [`Real`], which is
//! implemented for `f32` and `f64`. Tolerances are expressed in `f64` and
//! converted with [`lit`], so single precision builds compile but the
//! default thresholds are tuned for double precision.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FloatConst, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + FloatConst + ToPrimitive + Default + serde::Serialize + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

/// Dense complex matrix.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Dense complex column vector.
pub type CVector<T> = DVector<Complex<T>>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Converts a count into `T`.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    nalgebra::convert(n as f64)
}

/// Lossy conversion to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn creal<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}
