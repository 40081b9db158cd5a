//! Floating-point abstraction shared by every numerical module.
//!
//! All inference code is written against [`Scalar`] so the same recursions
//! run in `f64` (the default everywhere) or `f32`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    fn erf(self) -> Self;
    fn erfc(self) -> Self;

    /// Below this argument `exp` is subnormal or zero.
    const EXP_UNDERFLOW: Self;

    /// Lossless-enough literal conversion; panics only on non-representable
    /// constants, which would be a programming error.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }
}

impl Scalar for f64 {
    const EXP_UNDERFLOW: Self = -708.4;
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Scalar for f32 {
    const EXP_UNDERFLOW: Self = -87.34;
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

/// Standard normal CDF.
pub fn normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * (-x / T::SQRT_2()).erfc()
}

/// Mass of the standard normal on `[lo, hi]`, evaluated on the tail side
/// that avoids cancellation.
pub fn normal_mass<T: Scalar>(lo: T, hi: T) -> T {
    if hi <= lo {
        return T::zero();
    }
    let half = T::lit(0.5);
    let s = T::SQRT_2();
    if lo >= T::zero() {
        half * ((lo / s).erfc() - (hi / s).erfc())
    } else if hi <= T::zero() {
        half * ((-hi / s).erfc() - (-lo / s).erfc())
    } else {
        T::one() - half * (hi / s).erfc() - half * (-lo / s).erfc()
    }
}

/// `log(Σ exp(xᵢ))`, with an empty or all-`-inf` input giving `-inf`.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    if m == T::infinity() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp<T> {
    max: T,
    scaled: T,
}

impl<T: Scalar> Default for LogSumExp<T> {
    fn default() -> Self {
        Self {
            max: T::neg_infinity(),
            scaled: T::zero(),
        }
    }
}

impl<T: Scalar> LogSumExp<T> {
    pub fn push(&mut self, x: T) {
        if x == T::neg_infinity() {
            return;
        }
        if x <= self.max {
            self.scaled = self.scaled + (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + T::one();
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.max == T::neg_infinity() {
            return;
        }
        if self.max == T::neg_infinity() {
            *self = *other;
            return;
        }
        if other.max <= self.max {
            self.scaled = self.scaled + other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    pub fn value(&self) -> T {
        if self.max == T::neg_infinity() {
            T::neg_infinity()
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Replaces subnormal magnitudes by zero. Subnormal arithmetic is slow on
/// common hardware and the values it carries are below any tolerance we use.
#[inline]
pub(crate) fn flush<T: Scalar>(x: T) -> T {
    if x.abs() < T::min_positive_value() {
        T::zero()
    } else {
        x
    }
}

/// `exp(x)`, with zero wherever the result would be subnormal anyway.
/// Skipping the call matters in the pairwise loops, where most far-apart
/// pairs underflow.
#[inline]
pub(crate) fn exp_or_zero<T: Scalar>(x: T) -> T {
    if x < T::EXP_UNDERFLOW {
        T::zero()
    } else {
        x.exp()
    }
}

/// `ln(x)` with `ln(0) = -inf` made explicit for non-positive inputs.
#[inline]
pub(crate) fn ln_or_neg_inf<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x.ln()
    } else {
        T::neg_infinity()
    }
}
