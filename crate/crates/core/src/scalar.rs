use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the numeric code: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Arithmetic mean of a non-empty slice.
pub fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().copied().sum::<T>() / T::from_count(xs.len()))
}

/// Sample (n - 1) variance together with the mean.
pub fn mean_and_sample_var<T: Scalar>(xs: &[T]) -> Option<(T, T)> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    Some((m, ss / T::from_count(xs.len() - 1)))
}

/// Z-score a vector with the sample standard deviation. `None` when the
/// vector has fewer than two entries or zero variance.
pub fn zscore<T: Scalar>(xs: &[T]) -> Option<Vec<T>> {
    let (m, var) = mean_and_sample_var(xs)?;
    let sd = var.sqrt();
    if !(sd > T::zero()) || !sd.is_finite() {
        return None;
    }
    Some(xs.iter().map(|&x| (x - m) / sd).collect())
}
