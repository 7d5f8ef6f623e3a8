//! The scalar abstraction the whole pipeline is generic over.
//!
//! Every domain operation, cell update and loss is written against [`Scalar`]
//! so the same code runs in two modes: plain `f64` for certification and
//! attacks, and [`crate::tape::Var`] for reverse-mode differentiation during
//! certified training. Branch decisions (max/min selection, candidate
//! filtering, degeneracy checks) always go through [`Scalar::val`], so the
//! recorded derivative follows the selected branch.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;

    /// The numeric value, used for all control flow.
    fn val(self) -> f64;

    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;

    /// Absolute value with subgradient convention sign(0) = 0.
    fn abs(self) -> Self;

    /// Value-based maximum; ties select the first argument, and the
    /// derivative flows through the selected operand only.
    fn smax(self, other: Self) -> Self {
        if other.val() > self.val() {
            other
        } else {
            self
        }
    }

    /// Value-based minimum; ties select the first argument.
    fn smin(self, other: Self) -> Self {
        if other.val() < self.val() {
            other
        } else {
            self
        }
    }

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn val(self) -> f64 {
        self
    }

    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    fn sigmoid(self) -> Self {
        sigmoid_f64(self)
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Converts a slice of `f64` into any scalar type.
pub fn lift<S: Scalar>(xs: &[f64]) -> Vec<S> {
    xs.iter().map(|&x| S::from_f64(x)).collect()
}

/// Extracts the numeric values of a scalar slice.
pub fn values<S: Scalar>(xs: &[S]) -> Vec<f64> {
    xs.iter().map(|x| x.val()).collect()
}
