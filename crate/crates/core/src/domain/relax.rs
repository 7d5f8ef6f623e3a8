//! Linear relaxations of the non-linear cell operations.
//!
//! Two constructions live here. [`chord_relaxation`] encloses an S-shaped
//! activation on an interval between two parallel lines of chord slope k: the
//! offsets come from the exact extrema of f(x) - kx, which sit either at the
//! interval endpoints or at the closed-form preimages of f'(x) = k.
//! [`sigma_tanh_planes`] encloses the two-variable surface sigmoid(x)*tanh(y)
//! between two parallel planes per coordinate; the offsets come from corner
//! and edge candidates (closed forms again) plus a coordinate-ascent refined
//! interior candidate seeded from a dense grid.

use crate::domain::bounds::IntervalBounds;
use crate::scalar::{sigmoid_f64, Scalar};

/// Width below which an interval is treated as a point and the relaxation
/// falls back to the tangent at the midpoint.
pub const DEGENERATE_WIDTH: f64 = 1e-12;

/// Safety margin added to refined plane offsets to absorb the residual of the
/// interior ascent; orders of magnitude below every test tolerance.
const OFFSET_PAD: f64 = 1e-12;

const GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn eval<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => x.sigmoid(),
        }
    }

    pub fn eval_f64(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid_f64(x),
        }
    }

    /// First derivative, in the scalar type so it stays differentiable.
    pub fn deriv<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                S::one() - t * t
            }
            Activation::Sigmoid => {
                let s = x.sigmoid();
                s * (S::one() - s)
            }
        }
    }

    /// The two solutions of f'(x) = slope, when they exist. Uses forms that
    /// stay accurate when the slope is close to 0 (saturated intervals).
    pub fn slope_preimages(self, slope: f64) -> Option<(f64, f64)> {
        match self {
            Activation::Tanh => {
                // tanh'(x) = 1 - tanh(x)^2 = k  =>  tanh(x) = +-sqrt(1-k),
                // artanh(sqrt(1-k)) = ln(1 + sqrt(1-k)) - ln(k)/2.
                if slope > 0.0 && slope < 1.0 {
                    let s = (1.0 - slope).sqrt();
                    let x = (1.0 + s).ln() - 0.5 * slope.ln();
                    Some((-x, x))
                } else if slope == 1.0 {
                    Some((0.0, 0.0))
                } else {
                    None
                }
            }
            Activation::Sigmoid => {
                // sigma'(x) = s(1-s) = k  =>  s = (1 -+ sqrt(1-4k))/2; the low
                // root is computed as 2k/(1 + sqrt(1-4k)) to avoid cancellation.
                if slope > 0.0 && slope <= 0.25 {
                    let root = (1.0 - 4.0 * slope).max(0.0).sqrt();
                    let s_lo = 2.0 * slope / (1.0 + root);
                    let x = (s_lo / (1.0 - s_lo)).ln();
                    Some((x, -x))
                } else {
                    None
                }
            }
        }
    }
}

/// Parallel bounding lines per coordinate: for every x in the source interval,
/// slope*x + lower_offset <= f(x) <= slope*x + upper_offset.
#[derive(Debug, Clone)]
pub struct ChordRelaxation<S> {
    pub slope: Vec<S>,
    pub upper_offset: Vec<S>,
    pub lower_offset: Vec<S>,
}

pub fn chord_relaxation<S: Scalar>(bounds: &IntervalBounds<S>, f: Activation) -> ChordRelaxation<S> {
    let n = bounds.len();
    let mut slope = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    for j in 0..n {
        let l = bounds.lower[j];
        let u = bounds.upper[j];
        if u.val() - l.val() < DEGENERATE_WIDTH {
            let mid = (l + u) * S::from_f64(0.5);
            let k = f.deriv(mid);
            let off = f.eval(mid) - k * mid;
            slope.push(k);
            upper.push(off);
            lower.push(off);
            continue;
        }
        let k = (f.eval(u) - f.eval(l)) / (u - l);
        let mut candidates = vec![f.eval(l) - k * l, f.eval(u) - k * u];
        if let Some((x1, x2)) = f.slope_preimages(k.val()) {
            for x in [x1, x2] {
                if x >= l.val() && x <= u.val() {
                    let xs = S::from_f64(x);
                    candidates.push(f.eval(xs) - k * xs);
                }
            }
        }
        let mut c = candidates[0];
        let mut d = candidates[0];
        for &cand in &candidates[1..] {
            c = c.smax(cand);
            d = d.smin(cand);
        }
        slope.push(k);
        upper.push(c);
        lower.push(d);
    }
    ChordRelaxation {
        slope,
        upper_offset: upper,
        lower_offset: lower,
    }
}

/// Parallel bounding planes per coordinate for sigmoid(x)*tanh(y):
/// slope_x*x + slope_y*y + lower_offset <= sigmoid(x)tanh(y) <= slope_x*x + slope_y*y + upper_offset
/// over the box [lx,ux] x [ly,uy].
#[derive(Debug, Clone)]
pub struct PlaneRelaxation<S> {
    pub slope_x: Vec<S>,
    pub slope_y: Vec<S>,
    pub upper_offset: Vec<S>,
    pub lower_offset: Vec<S>,
}

pub fn sigma_tanh_planes<S: Scalar>(
    bx: &IntervalBounds<S>,
    by: &IntervalBounds<S>,
) -> PlaneRelaxation<S> {
    debug_assert_eq!(bx.len(), by.len());
    let n = bx.len();
    let mut slope_x = Vec::with_capacity(n);
    let mut slope_y = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    for j in 0..n {
        let (lx, ux) = (bx.lower[j], bx.upper[j]);
        let (ly, uy) = (by.lower[j], by.upper[j]);

        // Plane slopes: mean of the partial derivatives over the four corners.
        let quarter = S::from_f64(0.25);
        let mut a = S::zero();
        let mut b = S::zero();
        for &x in &[lx, ux] {
            for &y in &[ly, uy] {
                a = a + Activation::Sigmoid.deriv(x) * y.tanh();
                b = b + x.sigmoid() * Activation::Tanh.deriv(y);
            }
        }
        let a = a * quarter;
        let b = b * quarter;

        let wx = ux.val() - lx.val();
        let wy = uy.val() - ly.val();
        if wx < DEGENERATE_WIDTH && wy < DEGENERATE_WIDTH {
            let mx = (lx + ux) * S::from_f64(0.5);
            let my = (ly + uy) * S::from_f64(0.5);
            let g = mx.sigmoid() * my.tanh() - a * mx - b * my;
            slope_x.push(a);
            slope_y.push(b);
            upper.push(g);
            lower.push(g);
            continue;
        }

        // Candidates evaluated in S so derivatives flow through the bounds
        // where the extremum is attained on the boundary; refined interior
        // points enter as constants (stationarity makes that exact).
        let g_of = |x: S, y: S| x.sigmoid() * y.tanh() - a * x - b * y;
        let mut cands: Vec<S> = Vec::with_capacity(16);
        for &x in &[lx, ux] {
            for &y in &[ly, uy] {
                cands.push(g_of(x, y));
            }
        }
        // Edges x = const: critical points of sigma(x)t - b y in y.
        for &x in &[lx, ux] {
            let s = sigmoid_f64(x.val());
            let q = b.val() / s;
            if let Some((y1, y2)) = Activation::Tanh.slope_preimages(q) {
                for y in [y1, y2] {
                    if y >= ly.val() && y <= uy.val() {
                        cands.push(g_of(x, S::from_f64(y)));
                    }
                }
            }
        }
        // Edges y = const: critical points of t*sigma(x) - a x in x.
        for &y in &[ly, uy] {
            let t = y.val().tanh();
            if t != 0.0 {
                let q = a.val() / t;
                if let Some((x1, x2)) = Activation::Sigmoid.slope_preimages(q) {
                    for x in [x1, x2] {
                        if x >= lx.val() && x <= ux.val() {
                            cands.push(g_of(S::from_f64(x), y));
                        }
                    }
                }
            }
        }
        // Interior extrema: coordinate ascent/descent seeded from a dense grid.
        let box_f64 = (lx.val(), ux.val(), ly.val(), uy.val());
        for maximize in [true, false] {
            let (x, y) = refine_extremum(a.val(), b.val(), box_f64, maximize);
            cands.push(g_of(S::from_f64(x), S::from_f64(y)));
        }

        let mut up = cands[0];
        let mut lo = cands[0];
        for &c in &cands[1..] {
            up = up.smax(c);
            lo = lo.smin(c);
        }
        slope_x.push(a);
        slope_y.push(b);
        upper.push(up + S::from_f64(OFFSET_PAD));
        lower.push(lo - S::from_f64(OFFSET_PAD));
    }
    PlaneRelaxation {
        slope_x,
        slope_y,
        upper_offset: upper,
        lower_offset: lower,
    }
}

fn plane_gap(a: f64, b: f64, x: f64, y: f64) -> f64 {
    sigmoid_f64(x) * y.tanh() - a * x - b * y
}

/// Best x in [lx,ux] for fixed tanh value t, considering endpoints and the
/// closed-form critical points of t*sigma(x) - a*x.
fn best_x(a: f64, t: f64, lx: f64, ux: f64, b_term: f64, y: f64, maximize: bool) -> f64 {
    let mut best = lx;
    let mut best_v = plane_gap(a, b_term, lx, y);
    let mut consider = |x: f64| {
        let v = plane_gap(a, b_term, x, y);
        if (maximize && v > best_v) || (!maximize && v < best_v) {
            best = x;
            best_v = v;
        }
    };
    consider(ux);
    if t != 0.0 {
        if let Some((x1, x2)) = Activation::Sigmoid.slope_preimages(a / t) {
            for x in [x1, x2] {
                if x >= lx && x <= ux {
                    consider(x);
                }
            }
        }
    }
    best
}

fn best_y(b: f64, s: f64, ly: f64, uy: f64, a_term: f64, x: f64, maximize: bool) -> f64 {
    let mut best = ly;
    let mut best_v = plane_gap(a_term, b, x, ly);
    let mut consider = |y: f64| {
        let v = plane_gap(a_term, b, x, y);
        if (maximize && v > best_v) || (!maximize && v < best_v) {
            best = y;
            best_v = v;
        }
    };
    consider(uy);
    if let Some((y1, y2)) = Activation::Tanh.slope_preimages(b / s) {
        for y in [y1, y2] {
            if y >= ly && y <= uy {
                consider(y);
            }
        }
    }
    best
}

/// Locates an extremum of sigmoid(x)tanh(y) - ax - by over the box: dense-grid
/// seed followed by alternating exact one-dimensional solves.
fn refine_extremum(a: f64, b: f64, bx: (f64, f64, f64, f64), maximize: bool) -> (f64, f64) {
    let (lx, ux, ly, uy) = bx;
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * (i as f64) / ((GRID - 1) as f64);
    let sig: Vec<f64> = (0..GRID).map(|i| sigmoid_f64(step(lx, ux, i))).collect();
    let th: Vec<f64> = (0..GRID).map(|i| step(ly, uy, i).tanh()).collect();
    let mut bi = 0;
    let mut bj = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..GRID {
        let x = step(lx, ux, i);
        for j in 0..GRID {
            let y = step(ly, uy, j);
            let mut v = sig[i] * th[j] - a * x - b * y;
            if !maximize {
                v = -v;
            }
            if v > best {
                best = v;
                bi = i;
                bj = j;
            }
        }
    }
    let mut x = step(lx, ux, bi);
    let mut y = step(ly, uy, bj);
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..60 {
        x = best_x(a, y.tanh(), lx, ux, b, y, maximize);
        y = best_y(b, sigmoid_f64(x), ly, uy, a, x, maximize);
        let v = plane_gap(a, b, x, y);
        if (v - prev).abs() < 1e-15 {
            break;
        }
        prev = v;
    }
    (x, y)
}
