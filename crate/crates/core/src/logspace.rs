//! Natural-log arithmetic helpers.
//!
//! Every partition function in this crate lives in log space; `LogReal` is a
//! thin wrapper that makes the intent explicit at API boundaries.

use std::f64::consts::LN_2;
use std::ops::{Add, Mul};

/// Natural logarithm of a nonnegative quantity. `-inf` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
pub struct LogReal(pub f64);

impl LogReal {
    pub const ZERO: LogReal = LogReal(f64::NEG_INFINITY);
    pub const ONE: LogReal = LogReal(0.0);

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    pub fn from_linear(x: f64) -> LogReal {
        LogReal(x.ln())
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

/// Product of the underlying quantities.
#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        LogReal(self.0 + rhs.0)
    }
}

/// Sum of the underlying quantities.
impl Add for LogReal {
    type Output = LogReal;
    fn add(self, rhs: LogReal) -> LogReal {
        LogReal(log_add_exp(self.0, rhs.0))
    }
}

/// `log(1 + e^y)` without overflow for large `y` or loss for very negative `y`.
#[inline]
pub fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

/// `log(½(1 + e^{-x}))`, the fair-coin average of an excursion sign factor.
#[inline]
pub fn log_half_one_plus_exp_neg(x: f64) -> f64 {
    -LN_2 + softplus(-x)
}

/// Logistic function `1/(1 + e^{-y})`, evaluated on the stable branch.
#[inline]
pub fn logistic(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Two-pass `log Σ e^{x_i}`; `-inf` for an empty slice or all `-inf` inputs.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Log-sum-exp over an iterator, accumulated in a single pass.
///
/// The running maximum is rescaled when it grows, so the result is
/// independent of where the largest term appears.
pub fn log_sum_exp_iter<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for x in xs {
        if x == f64::NEG_INFINITY {
            continue;
        }
        if x > max {
            acc = acc * (max - x).exp() + 1.0;
            max = x;
        } else {
            acc += (x - max).exp();
        }
    }
    if max == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        max + acc.ln()
    }
}
