//! The zonotope domain: an affine set over shared noise symbols.
//!
//! A value is center + sum_i row_i * eps_i with eps_i in [-1, 1]. Rows are
//! stored sparsely, keyed by a global symbol id from [`NoisePool`], so two
//! zonotopes built in the same run agree on what each symbol means and
//! correlations survive products and sums.

use crate::domain::bounds::IntervalBounds;
use crate::domain::pool::NoisePool;
use crate::domain::relax::{Activation, ChordRelaxation, PlaneRelaxation};
use crate::error::DomainError;
use crate::math::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Zonotope<S> {
    center: Vec<S>,
    /// Generator rows sorted by symbol id; each row has the same length as
    /// the center.
    gens: Vec<(u32, Vec<S>)>,
}

impl<S: Scalar> Zonotope<S> {
    pub fn point(center: Vec<S>) -> Self {
        Zonotope {
            center,
            gens: Vec::new(),
        }
    }

    /// Axis-aligned ball of the given radius: one fresh symbol per coordinate.
    pub fn from_ball(center: &[S], radius: f64, pool: &mut NoisePool) -> Self {
        let n = center.len();
        let block = pool.fresh_block(n);
        let r = S::from_f64(radius);
        let gens = block
            .enumerate()
            .map(|(j, sym)| {
                let mut row = vec![S::zero(); n];
                row[j] = r;
                (sym, row)
            })
            .collect();
        Zonotope {
            center: center.to_vec(),
            gens,
        }
    }

    /// Axis-aligned box over the given bounds: center at the midpoint, one
    /// fresh symbol per coordinate with half-width radius.
    pub fn box_from_bounds(bounds: &IntervalBounds<S>, pool: &mut NoisePool) -> Self {
        let n = bounds.len();
        let half = S::from_f64(0.5);
        let center: Vec<S> = (0..n)
            .map(|j| (bounds.lower[j] + bounds.upper[j]) * half)
            .collect();
        let block = pool.fresh_block(n);
        let gens = block
            .enumerate()
            .map(|(j, sym)| {
                let mut row = vec![S::zero(); n];
                row[j] = (bounds.upper[j] - bounds.lower[j]) * half;
                (sym, row)
            })
            .collect();
        Zonotope { center, gens }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn noise_count(&self) -> usize {
        self.gens.len()
    }

    pub fn center(&self) -> &[S] {
        &self.center
    }

    pub fn generators(&self) -> &[(u32, Vec<S>)] {
        &self.gens
    }

    /// Interval bounds: center -+ sum of absolute generator rows.
    pub fn concretize(&self) -> IntervalBounds<S> {
        let n = self.dim();
        let mut radius = vec![S::zero(); n];
        for (_, row) in &self.gens {
            for j in 0..n {
                radius[j] = radius[j] + row[j].abs();
            }
        }
        IntervalBounds::new(
            (0..n).map(|j| self.center[j] - radius[j]).collect(),
            (0..n).map(|j| self.center[j] + radius[j]).collect(),
        )
    }

    /// Exact affine image W*z + b: maps the center and every generator row.
    pub fn affine(&self, w: &Matrix<S>, b: &[S]) -> Result<Self, DomainError> {
        if w.cols() != self.dim() {
            return Err(DomainError::dim("affine input", w.cols(), self.dim()));
        }
        if b.len() != w.rows() {
            return Err(DomainError::dim("affine bias", w.rows(), b.len()));
        }
        let mut center = w.matvec(&self.center);
        for (c, &bi) in center.iter_mut().zip(b.iter()) {
            *c = *c + bi;
        }
        let gens = self
            .gens
            .iter()
            .map(|(sym, row)| (*sym, w.matvec(row)))
            .collect();
        Ok(Zonotope { center, gens })
    }

    /// Elementwise affine map x_j -> scale_j * x_j + shift_j, exact.
    pub fn affine_diag(&self, scale: &[S], shift: &[S]) -> Self {
        let n = self.dim();
        debug_assert_eq!(scale.len(), n);
        debug_assert_eq!(shift.len(), n);
        let center = (0..n).map(|j| self.center[j] * scale[j] + shift[j]).collect();
        let gens = self
            .gens
            .iter()
            .map(|(sym, row)| (*sym, (0..n).map(|j| row[j] * scale[j]).collect()))
            .collect();
        Zonotope { center, gens }
    }

    /// Exact sum: centers add, rows with the same symbol add.
    pub fn add(&self, other: &Self) -> Result<Self, DomainError> {
        if self.dim() != other.dim() {
            return Err(DomainError::dim("zonotope sum", self.dim(), other.dim()));
        }
        let n = self.dim();
        let center = (0..n).map(|j| self.center[j] + other.center[j]).collect();
        let gens = merge_rows(&self.gens, &other.gens, n, |a, b| {
            (0..n).map(|j| a[j] + b[j]).collect()
        });
        Ok(Zonotope { center, gens })
    }

    /// Parallelogram-style elementwise transformer: scales the center and all
    /// rows by the relaxation slope, shifts by the offset midpoint, and adds
    /// one fresh axis-aligned row per coordinate with the offset half-width.
    pub fn elementwise(&self, relax: &ChordRelaxation<S>, pool: &mut NoisePool) -> Self {
        let n = self.dim();
        let half = S::from_f64(0.5);
        let shift: Vec<S> = (0..n)
            .map(|j| (relax.upper_offset[j] + relax.lower_offset[j]) * half)
            .collect();
        let mut out = self.affine_diag(&relax.slope, &shift);
        let block = pool.fresh_block(n);
        for (j, sym) in block.enumerate() {
            let mut row = vec![S::zero(); n];
            row[j] = (relax.upper_offset[j] - relax.lower_offset[j]) * half;
            out.gens.push((sym, row));
        }
        out
    }

    /// Evaluates the affine form at a concrete noise assignment (indexed by
    /// symbol id). Symbols outside the assignment are an error in tests.
    pub fn evaluate(&self, eps: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.center.iter().map(|c| c.val()).collect();
        for (sym, row) in &self.gens {
            let e = eps[*sym as usize];
            for j in 0..out.len() {
                out[j] += row[j].val() * e;
            }
        }
        out
    }
}

/// Joint transformer for sigmoid(x) (.) tanh(y) on the plane relaxation:
/// out = a (.) x + b (.) y + offset midpoint, plus one fresh row per
/// coordinate with the offset half-width.
pub fn sigma_tanh_main<S: Scalar>(
    x: &Zonotope<S>,
    y: &Zonotope<S>,
    planes: &PlaneRelaxation<S>,
    pool: &mut NoisePool,
) -> Result<Zonotope<S>, DomainError> {
    if x.dim() != y.dim() {
        return Err(DomainError::dim("sigma-tanh product", x.dim(), y.dim()));
    }
    let n = x.dim();
    let half = S::from_f64(0.5);
    let center: Vec<S> = (0..n)
        .map(|j| {
            x.center[j] * planes.slope_x[j]
                + y.center[j] * planes.slope_y[j]
                + (planes.upper_offset[j] + planes.lower_offset[j]) * half
        })
        .collect();
    let mut gens = merge_scaled_rows(
        &x.gens,
        &y.gens,
        n,
        &planes.slope_x,
        &planes.slope_y,
    );
    let block = pool.fresh_block(n);
    for (j, sym) in block.enumerate() {
        let mut row = vec![S::zero(); n];
        row[j] = (planes.upper_offset[j] - planes.lower_offset[j]) * half;
        gens.push((sym, row));
    }
    Ok(Zonotope { center, gens })
}

/// Generic Hadamard product of two affine forms over a shared symbol pool.
///
/// Per coordinate, with x = x0 + sum_i x_i eps_i and y likewise:
/// - the diagonal eps_i^2 terms lie in [0,1] and are centered, shifting the
///   output center by sum_i x_i y_i / 2,
/// - linear terms x0 y_i + y0 x_i stay on the existing symbols,
/// - the remainder (half the absolute diagonal plus all cross terms) goes into
///   one fresh symbol per coordinate.
pub fn hadamard_main<S: Scalar>(
    x: &Zonotope<S>,
    y: &Zonotope<S>,
    pool: &mut NoisePool,
) -> Result<Zonotope<S>, DomainError> {
    if x.dim() != y.dim() {
        return Err(DomainError::dim("hadamard product", x.dim(), y.dim()));
    }
    let n = x.dim();
    let half = S::from_f64(0.5);

    // Diagonal terms over shared symbols.
    let mut diag_sum = vec![S::zero(); n]; // sum_i x_i y_i
    let mut diag_abs = vec![S::zero(); n]; // sum_i |x_i y_i|
    let (mut i, mut j) = (0, 0);
    while i < x.gens.len() && j < y.gens.len() {
        let (sx, rx) = &x.gens[i];
        let (sy, ry) = &y.gens[j];
        match sx.cmp(sy) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                for k in 0..n {
                    let p = rx[k] * ry[k];
                    diag_sum[k] = diag_sum[k] + p;
                    diag_abs[k] = diag_abs[k] + p.abs();
                }
                i += 1;
                j += 1;
            }
        }
    }

    // Total absolute radii for the cross-term bound.
    let radius = |z: &Zonotope<S>| -> Vec<S> {
        let mut r = vec![S::zero(); n];
        for (_, row) in &z.gens {
            for k in 0..n {
                r[k] = r[k] + row[k].abs();
            }
        }
        r
    };
    let rx = radius(x);
    let ry = radius(y);

    let center: Vec<S> = (0..n)
        .map(|k| x.center[k] * y.center[k] + diag_sum[k] * half)
        .collect();

    // Linear terms on existing symbols: x0*y_i + y0*x_i.
    let mut gens = merge_scaled_rows(&y.gens, &x.gens, n, &x.center, &y.center);

    // Remainder: rx*ry - |diag|/2 = |diag|/2 + cross terms, per coordinate.
    let block = pool.fresh_block(n);
    for (k, sym) in block.enumerate() {
        let mut row = vec![S::zero(); n];
        row[k] = rx[k] * ry[k] - diag_abs[k] * half;
        gens.push((sym, row));
    }
    Ok(Zonotope { center, gens })
}

/// Box-style transformer (Eq.-5 shape): the image interval of a monotone
/// activation, boxed with exactly n fresh symbols.
pub fn box_transform<S: Scalar>(
    bounds: &IntervalBounds<S>,
    f: Activation,
    pool: &mut NoisePool,
) -> Zonotope<S> {
    let image = IntervalBounds::new(
        bounds.lower.iter().map(|&l| f.eval(l)).collect(),
        bounds.upper.iter().map(|&u| f.eval(u)).collect(),
    );
    Zonotope::box_from_bounds(&image, pool)
}

/// Merges two sorted row lists, combining rows that share a symbol.
fn merge_rows<S: Scalar>(
    a: &[(u32, Vec<S>)],
    b: &[(u32, Vec<S>)],
    n: usize,
    combine: impl Fn(&[S], &[S]) -> Vec<S>,
) -> Vec<(u32, Vec<S>)> {
    let _ = n;
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, combine(&a[i].1, &b[j].1)));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Union of the symbol sets with rows scale_a (.) row_a + scale_b (.) row_b.
fn merge_scaled_rows<S: Scalar>(
    a: &[(u32, Vec<S>)],
    b: &[(u32, Vec<S>)],
    n: usize,
    scale_a: &[S],
    scale_b: &[S],
) -> Vec<(u32, Vec<S>)> {
    let scaled = |row: &[S], scale: &[S]| -> Vec<S> {
        (0..n).map(|k| row[k] * scale[k]).collect()
    };
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push((a[i].0, scaled(&a[i].1, scale_a)));
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push((b[j].0, scaled(&b[j].1, scale_b)));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let row = (0..n)
                    .map(|k| a[i].1[k] * scale_a[k] + b[j].1[k] * scale_b[k])
                    .collect();
                out.push((a[i].0, row));
                i += 1;
                j += 1;
            }
        }
    }
    for (sym, row) in &a[i..] {
        out.push((*sym, scaled(row, scale_a)));
    }
    for (sym, row) in &b[j..] {
        out.push((*sym, scaled(row, scale_b)));
    }
    out
}
