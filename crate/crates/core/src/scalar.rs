//! Scalar abstraction shared by every dense numerical routine.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point scalar usable for dense channel and state algebra: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + std::fmt::Display + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Default tolerance for hermiticity, positivity and trace checks at this precision.
    fn default_tol() -> Self;
}

impl Real for f32 {
    fn default_tol() -> Self {
        1e-4
    }
}

impl Real for f64 {
    fn default_tol() -> Self {
        1e-9
    }
}

/// Complex scalar over a [`Real`].
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

/// `i^power` for a power taken mod 4.
#[inline]
pub(crate) fn i_pow<T: Real>(power: u8) -> C<T> {
    match power & 3 {
        0 => c(T::one(), T::zero()),
        1 => c(T::zero(), T::one()),
        2 => c(-T::one(), T::zero()),
        _ => c(T::zero(), -T::one()),
    }
}

/// Modulus of a complex scalar.
#[inline]
pub(crate) fn cabs<T: Real>(v: C<T>) -> T {
    v.norm_sqr().sqrt()
}
