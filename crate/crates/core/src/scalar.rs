use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar used throughout the crate: `f32` or `f64`.
///
/// Linear algebra comes from nalgebra's `RealField`; conversions to and from
/// `f64` go through num-traits so file formats can stay float64 on disk.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar representable as f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }

    /// Strictly positive; false for NaN.
    #[inline]
    fn is_positive_value(self) -> bool {
        self > Self::zero()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        assert_eq!(<f64 as Real>::lit(0.25), 0.25);
        assert_eq!(<f32 as Real>::lit(0.25), 0.25f32);
        assert!(!<f64 as Real>::lit(f64::NAN).is_finite_value());
        assert_eq!(<f32 as Real>::from_usize_lossy(7).as_f64(), 7.0);
    }
}
