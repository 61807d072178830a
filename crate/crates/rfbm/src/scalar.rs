//! Scalar abstraction over the floating-point type.
//!
//! All closed-form evaluators and samplers are generic over [`Scalar`]
//! (f32 or f64); the crate root exposes f64 aliases for the common case.
//! Stated tolerances throughout the crate assume f64.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar with the extras the toolkit needs beyond
/// `num_traits::Float`: literal conversion, `erfc`, and standard-normal
/// sampling (kept as trait methods so call sites stay free of
/// distribution bounds).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + core::ops::AddAssign
    + core::ops::SubAssign
    + core::ops::MulAssign
    + core::iter::Sum<Self>
    + core::fmt::Debug
    + core::fmt::Display
    + core::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    fn erfc(self) -> Self;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Shorthand for converting an f64 literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

/// Scalars usable in the FFT-based samplers.
pub trait SimScalar: Scalar + rustfft::FftNum {}

impl SimScalar for f64 {}
impl SimScalar for f32 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_matches_between_widths() {
        let x64 = <f64 as Scalar>::erfc(0.7);
        let x32 = <f32 as Scalar>::erfc(0.7f32);
        assert!((x64 - x32 as f64).abs() < 1e-6);
    }

    #[test]
    fn literal_conversion_round_trips() {
        assert_eq!(f64::of(0.25), 0.25);
        assert_eq!(f32::of(0.25), 0.25f32);
    }
}
