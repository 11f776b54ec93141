use std::fmt;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type for image intensities and loss values: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64` for parameters and constants.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

/// Compensated (Kahan) summation. Loss reductions and image statistics use
/// this so results do not depend on how a batch is chunked.
pub fn kahan_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_matches_exact_small_sum() {
        let s: f64 = kahan_sum([1.0, 2.0, 3.0]);
        assert_eq!(s, 6.0);
    }

    #[test]
    fn kahan_beats_naive_on_adversarial_input() {
        // 1.0 followed by many tiny values that a naive f32 sum drops.
        let values: Vec<f32> = std::iter::once(1.0f32)
            .chain(std::iter::repeat_n(1e-8f32, 100_000))
            .collect();
        let naive: f32 = values.iter().copied().sum();
        let kahan: f32 = kahan_sum(values.iter().copied());
        let exact = 1.0 + f64::from(1e-8f32) * 100_000.0;
        // Naive f32 addition drops every tiny term (1.0 + 1e-8 == 1.0), an
        // error of ~1e-3; compensated summation is exact up to the final
        // rounding of the result, one ulp at 1.001.
        assert!((f64::from(kahan) - exact).abs() < (f64::from(naive) - exact).abs());
        assert!((f64::from(naive) - exact).abs() > 1e-4);
        assert!((f64::from(kahan) - exact).abs() < 1e-6);
    }
}
