//! Error types shared by the abstract-domain and propagation layers.

use thiserror::Error;

/// Tolerance below which an inverted intersection is treated as floating-point
/// noise and clamped to the midpoint instead of raised as an error.
pub const INVERTED_BOUNDS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Error)]
pub enum DomainError {
    /// The intersection of the main and support bounds came out empty beyond
    /// the floating-point tolerance. Both domains over-approximate the same
    /// set, so a genuine inversion means some transformer is unsound.
    #[error("inverted bounds at coordinate {coord}: lower {lower} > upper {upper} (gap {gap:.3e} exceeds {INVERTED_BOUNDS_TOL:.0e})")]
    InvertedBounds {
        coord: usize,
        lower: f64,
        upper: f64,
        gap: f64,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
}

impl DomainError {
    pub fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        DomainError::DimensionMismatch {
            context,
            expected,
            got,
        }
    }
}
