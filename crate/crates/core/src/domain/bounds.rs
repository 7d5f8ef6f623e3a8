//! Elementwise interval bounds, the concretization target of every domain.

use crate::error::{DomainError, INVERTED_BOUNDS_TOL};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct IntervalBounds<S> {
    pub lower: Vec<S>,
    pub upper: Vec<S>,
}

impl<S: Scalar> IntervalBounds<S> {
    pub fn new(lower: Vec<S>, upper: Vec<S>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        IntervalBounds { lower, upper }
    }

    pub fn point(values: &[S]) -> Self {
        IntervalBounds {
            lower: values.to_vec(),
            upper: values.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i].val() - self.lower[i].val()
    }

    pub fn midpoint(&self, i: usize) -> S {
        (self.lower[i] + self.upper[i]) * S::from_f64(0.5)
    }

    /// Elementwise intersection. Inversions within [`INVERTED_BOUNDS_TOL`] are
    /// floating-point noise and collapse to the midpoint; anything larger is a
    /// genuine soundness bug and becomes an error.
    pub fn intersect(&self, other: &Self) -> Result<Self, DomainError> {
        debug_assert_eq!(self.len(), other.len());
        let mut lower = Vec::with_capacity(self.len());
        let mut upper = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let mut l = self.lower[i].smax(other.lower[i]);
            let mut u = self.upper[i].smin(other.upper[i]);
            let gap = l.val() - u.val();
            if gap > 0.0 {
                if gap > INVERTED_BOUNDS_TOL {
                    return Err(DomainError::InvertedBounds {
                        coord: i,
                        lower: l.val(),
                        upper: u.val(),
                        gap,
                    });
                }
                let mid = (l + u) * S::from_f64(0.5);
                l = mid;
                u = mid;
            }
            lower.push(l);
            upper.push(u);
        }
        Ok(IntervalBounds { lower, upper })
    }

    /// Interval sum, exact per coordinate.
    pub fn sum(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        IntervalBounds {
            lower: (0..self.len()).map(|i| self.lower[i] + other.lower[i]).collect(),
            upper: (0..self.len()).map(|i| self.upper[i] + other.upper[i]).collect(),
        }
    }

    /// Interval product via the four corner products per coordinate.
    pub fn product(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        let mut lower = Vec::with_capacity(self.len());
        let mut upper = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let c1 = self.lower[i] * other.lower[i];
            let c2 = self.lower[i] * other.upper[i];
            let c3 = self.upper[i] * other.lower[i];
            let c4 = self.upper[i] * other.upper[i];
            lower.push(c1.smin(c2).smin(c3).smin(c4));
            upper.push(c1.smax(c2).smax(c3).smax(c4));
        }
        IntervalBounds { lower, upper }
    }

    /// True if the interval contains `x` up to `slack` at every coordinate.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.iter().enumerate().all(|(i, &v)| {
            v >= self.lower[i].val() - slack && v <= self.upper[i].val() + slack
        })
    }
}
