//! Floating-point scalar abstraction shared by the geometric and measure
//! kernels, plus a compensated accumulator.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used by the generic kernels: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; always succeeds for finite input.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to scalar")
    }

    fn of_u64(n: u64) -> Self {
        Self::from_u64(n).expect("u64 converts to scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn half() -> Self {
        Self::of(0.5)
    }

    fn two() -> Self {
        Self::of(2.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

impl<T: Scalar> Extend<T> for CompensatedSum<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> T {
    let mut acc = CompensatedSum::new();
    acc.extend(iter);
    acc.value()
}

/// `x·log(1/x)^j` with the convention that the expression vanishes at `x = 0`.
pub fn x_log_pow<T: Scalar>(x: T, j: i32) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x * (T::one() / x).ln().powi(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut terms = vec![1.0e16_f64];
        terms.extend(std::iter::repeat_n(1.0, 1000));
        terms.push(-1.0e16);
        assert_eq!(compensated_sum(terms.iter().copied()), 1000.0);
        let naive: f64 = terms.iter().sum();
        assert_ne!(naive, 1000.0);
    }

    #[test]
    fn zero_convention() {
        assert_eq!(x_log_pow(0.0_f64, 3), 0.0);
        assert!((x_log_pow(0.25_f64, 1) - 0.25 * 4.0_f64.ln()).abs() < 1e-15);
    }
}
