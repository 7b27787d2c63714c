use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

/// Scalar type of a lattice state: `f64` for the real-only phase-inversion
/// path, `Complex64` otherwise.
pub trait Amplitude:
    Copy
    + Send
    + Sync
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Mul<f64, Output = Self>
    + 'static
{
    const ZERO: Self;
    /// True for the real-only scalar.
    const REAL: bool;

    fn from_real(x: f64) -> Self;

    fn norm_sqr(self) -> f64;

    /// Multiplies by a unit phase factor. The real path only accepts real factors.
    fn rotate(self, factor: Complex64) -> Self;

    fn to_complex(self) -> Complex64;
}

impl Amplitude for f64 {
    const ZERO: Self = 0.0;
    const REAL: bool = true;

    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }

    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }

    #[inline]
    fn rotate(self, factor: Complex64) -> Self {
        debug_assert!(factor.im == 0.0, "complex phase on the real path");
        self * factor.re
    }

    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Amplitude for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const REAL: bool = false;

    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }

    #[inline]
    fn rotate(self, factor: Complex64) -> Self {
        self * factor
    }

    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
}
