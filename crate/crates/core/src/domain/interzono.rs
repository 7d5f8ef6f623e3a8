//! The intersection-refined domain: a main zonotope that carries correlations
//! plus an axis-aligned support zonotope that refines the interval bounds.
//!
//! The concretization is the elementwise intersection of the two members'
//! bounds. Affine maps apply to both members; non-linear transformers apply
//! the parallelogram/plane construction to the main member using the
//! *refined* bounds and rebuild the support as a box around the refined
//! output interval, so the intersection can only tighten what the plain
//! zonotope pipeline would produce.

use crate::domain::bounds::IntervalBounds;
use crate::domain::pool::NoisePool;
use crate::domain::relax::{chord_relaxation, sigma_tanh_planes, Activation};
use crate::domain::zonotope::{box_transform, hadamard_main, sigma_tanh_main, Zonotope};
use crate::error::DomainError;
use crate::math::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct InterZono<S> {
    main: Zonotope<S>,
    support: Zonotope<S>,
}

impl<S: Scalar> InterZono<S> {
    pub fn new(main: Zonotope<S>, support: Zonotope<S>) -> Result<Self, DomainError> {
        if main.dim() != support.dim() {
            return Err(DomainError::dim("interzono members", main.dim(), support.dim()));
        }
        Ok(InterZono { main, support })
    }

    pub fn main(&self) -> &Zonotope<S> {
        &self.main
    }

    pub fn support(&self) -> &Zonotope<S> {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.main.dim()
    }

    /// Wraps a zonotope with a box support around its exact interval hull.
    pub fn lift(z: Zonotope<S>, pool: &mut NoisePool) -> Self {
        let support = Zonotope::box_from_bounds(&z.concretize(), pool);
        InterZono { main: z, support }
    }

    /// Intersection of the members' interval bounds.
    pub fn concretize(&self) -> Result<IntervalBounds<S>, DomainError> {
        self.main.concretize().intersect(&self.support.concretize())
    }
}

/// The operations the abstract cell propagation needs, implemented by both the
/// plain zonotope pipeline (bounds from its own concretization) and the
/// intersection-refined pipeline (bounds from the intersection).
pub trait AbstractDomain<S: Scalar>: Clone {
    fn point(values: Vec<S>) -> Self;

    /// Per-frame input ball: one fresh symbol per coordinate.
    fn from_ball(center: &[S], radius: f64, pool: &mut NoisePool) -> Self;

    fn dim(&self) -> usize;

    /// Refined interval bounds of the represented set.
    fn bounds(&self) -> Result<IntervalBounds<S>, DomainError>;

    fn affine(&self, w: &Matrix<S>, b: &[S]) -> Result<Self, DomainError>;

    fn add(&self, other: &Self, pool: &mut NoisePool) -> Result<Self, DomainError>;

    /// x -> 1 - x, exact.
    fn one_minus(&self) -> Self;

    fn activation(&self, f: Activation, pool: &mut NoisePool) -> Result<Self, DomainError>;

    /// Joint transformer for sigmoid(x) (.) tanh(y) on pre-activations.
    fn sigma_tanh_product(x: &Self, y: &Self, pool: &mut NoisePool) -> Result<Self, DomainError>;

    /// Generic elementwise product of two already-transformed values.
    fn hadamard(x: &Self, y: &Self, pool: &mut NoisePool) -> Result<Self, DomainError>;

    /// Noise symbols carried by the correlation-tracking member (for audits).
    fn noise_count(&self) -> usize;
}

fn one_minus_parts<S: Scalar>(n: usize) -> (Vec<S>, Vec<S>) {
    (vec![-S::one(); n], vec![S::one(); n])
}

impl<S: Scalar> AbstractDomain<S> for Zonotope<S> {
    fn point(values: Vec<S>) -> Self {
        Zonotope::point(values)
    }

    fn from_ball(center: &[S], radius: f64, pool: &mut NoisePool) -> Self {
        Zonotope::from_ball(center, radius, pool)
    }

    fn dim(&self) -> usize {
        Zonotope::dim(self)
    }

    fn bounds(&self) -> Result<IntervalBounds<S>, DomainError> {
        Ok(self.concretize())
    }

    fn affine(&self, w: &Matrix<S>, b: &[S]) -> Result<Self, DomainError> {
        Zonotope::affine(self, w, b)
    }

    fn add(&self, other: &Self, _pool: &mut NoisePool) -> Result<Self, DomainError> {
        Zonotope::add(self, other)
    }

    fn one_minus(&self) -> Self {
        let (scale, shift) = one_minus_parts(self.dim());
        self.affine_diag(&scale, &shift)
    }

    fn activation(&self, f: Activation, pool: &mut NoisePool) -> Result<Self, DomainError> {
        let relax = chord_relaxation(&self.concretize(), f);
        Ok(self.elementwise(&relax, pool))
    }

    fn sigma_tanh_product(x: &Self, y: &Self, pool: &mut NoisePool) -> Result<Self, DomainError> {
        let planes = sigma_tanh_planes(&x.concretize(), &y.concretize());
        sigma_tanh_main(x, y, &planes, pool)
    }

    fn hadamard(x: &Self, y: &Self, pool: &mut NoisePool) -> Result<Self, DomainError> {
        hadamard_main(x, y, pool)
    }

    fn noise_count(&self) -> usize {
        Zonotope::noise_count(self)
    }
}

impl<S: Scalar> AbstractDomain<S> for InterZono<S> {
    fn point(values: Vec<S>) -> Self {
        InterZono {
            main: Zonotope::point(values.clone()),
            support: Zonotope::point(values),
        }
    }

    fn from_ball(center: &[S], radius: f64, pool: &mut NoisePool) -> Self {
        // The input ball is already a box, so the support shares the main
        // member's symbols; it gets rebuilt fresh at the first non-linearity.
        let main = Zonotope::from_ball(center, radius, pool);
        InterZono {
            support: main.clone(),
            main,
        }
    }

    fn dim(&self) -> usize {
        InterZono::dim(self)
    }

    fn bounds(&self) -> Result<IntervalBounds<S>, DomainError> {
        self.concretize()
    }

    fn affine(&self, w: &Matrix<S>, b: &[S]) -> Result<Self, DomainError> {
        Ok(InterZono {
            main: self.main.affine(w, b)?,
            support: self.support.affine(w, b)?,
        })
    }

    fn add(&self, other: &Self, pool: &mut NoisePool) -> Result<Self, DomainError> {
        let main = self.main.add(&other.main)?;
        let sum_bounds = self.concretize()?.sum(&other.concretize()?);
        let support = Zonotope::box_from_bounds(&sum_bounds, pool);
        Ok(InterZono { main, support })
    }

    fn one_minus(&self) -> Self {
        let (scale, shift) = one_minus_parts(self.dim());
        InterZono {
            main: self.main.affine_diag(&scale, &shift),
            support: self.support.affine_diag(&scale, &shift),
        }
    }

    fn activation(&self, f: Activation, pool: &mut NoisePool) -> Result<Self, DomainError> {
        let bounds = self.concretize()?;
        let relax = chord_relaxation(&bounds, f);
        let main = self.main.elementwise(&relax, pool);
        let support = box_transform(&bounds, f, pool);
        Ok(InterZono { main, support })
    }

    fn sigma_tanh_product(x: &Self, y: &Self, pool: &mut NoisePool) -> Result<Self, DomainError> {
        if x.dim() != y.dim() {
            return Err(DomainError::dim("sigma-tanh product", x.dim(), y.dim()));
        }
        let bx = x.concretize()?;
        let by = y.concretize()?;
        let planes = sigma_tanh_planes(&bx, &by);
        let main = sigma_tanh_main(&x.main, &y.main, &planes, pool)?;

        // Support bounds: the product is monotone in tanh(y), and sigmoid is
        // positive, so the extremes sit at y-endpoints with the x-endpoint
        // chosen by the sign of tanh(y).
        let n = x.dim();
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        for j in 0..n {
            let sl = bx.lower[j].sigmoid();
            let su = bx.upper[j].sigmoid();
            let tl = by.lower[j].tanh();
            let tu = by.upper[j].tanh();
            lower.push((sl * tl).smin(su * tl));
            upper.push((sl * tu).smax(su * tu));
        }
        let support = Zonotope::box_from_bounds(&IntervalBounds::new(lower, upper), pool);
        Ok(InterZono { main, support })
    }

    fn hadamard(x: &Self, y: &Self, pool: &mut NoisePool) -> Result<Self, DomainError> {
        let main = hadamard_main(&x.main, &y.main, pool)?;
        let support_bounds = x.concretize()?.product(&y.concretize()?);
        let support = Zonotope::box_from_bounds(&support_bounds, pool);
        Ok(InterZono { main, support })
    }

    fn noise_count(&self) -> usize {
        self.main.noise_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn concretize_intersects_members() {
        let mut pool = NoisePool::new();
        let main = Zonotope::from_ball(&[0.0], 2.0, &mut pool);
        let support = Zonotope::from_ball(&[1.0], 2.0, &mut pool);
        let d = InterZono::new(main, support).unwrap();
        let b = d.concretize().unwrap();
        assert_eq!((b.lower[0], b.upper[0]), (-1.0, 2.0));

        // Identical members: idempotent.
        let mut pool = NoisePool::new();
        let z = Zonotope::from_ball(&[0.5], 1.5, &mut pool);
        let d = InterZono::new(z.clone(), z).unwrap();
        let b = d.concretize().unwrap();
        assert_eq!((b.lower[0], b.upper[0]), (-1.0, 2.0));

        // Support strictly inside wins.
        let mut pool = NoisePool::new();
        let main = Zonotope::from_ball(&[0.5], 0.5, &mut pool);
        let support = Zonotope::from_ball(&[0.6], 0.1, &mut pool);
        let d = InterZono::new(main, support).unwrap();
        let b = d.concretize().unwrap();
        assert!((b.lower[0] - 0.5).abs() < 1e-15);
        assert!((b.upper[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn lift_preserves_interval_hull() {
        let mut pool = NoisePool::new();
        let mut z = Zonotope::from_ball(&[0.2, -0.4], 0.3, &mut pool);
        let extra: Vec<u32> = pool.fresh_block(1).collect();
        let _ = (&mut z, extra);
        let d = InterZono::lift(z.clone(), &mut pool);
        let zb = z.concretize();
        let db = d.concretize().unwrap();
        for j in 0..2 {
            assert_eq!(zb.lower[j], db.lower[j]);
            assert_eq!(zb.upper[j], db.upper[j]);
        }
    }

    #[test]
    fn point_maps_to_point_through_every_transformer() {
        let mut pool = NoisePool::new();
        let p = <InterZono<f64> as AbstractDomain<f64>>::point(vec![0.4, -0.8]);
        let act = p.activation(Activation::Tanh, &mut pool).unwrap();
        let b = act.concretize().unwrap();
        for j in 0..2 {
            let expect = [0.4f64, -0.8].map(f64::tanh)[j];
            assert!((b.lower[j] - expect).abs() < 1e-12);
            assert!((b.upper[j] - expect).abs() < 1e-12);
        }

        let x = <InterZono<f64> as AbstractDomain<f64>>::point(vec![0.0]);
        let y = <InterZono<f64> as AbstractDomain<f64>>::point(vec![0.0]);
        let prod = InterZono::sigma_tanh_product(&x, &y, &mut pool).unwrap();
        let b = prod.concretize().unwrap();
        assert!(b.lower[0].abs() < 1e-12);
        assert!(b.upper[0].abs() < 1e-12);
    }

    #[test]
    fn sigma_tanh_support_frozen_bounds() {
        // x in [-1,1], y in [-1,1]: support bounds are -+ sigmoid(1)*tanh(1).
        let mut pool = NoisePool::new();
        let x = <InterZono<f64> as AbstractDomain<f64>>::from_ball(&[0.0], 1.0, &mut pool);
        let y = <InterZono<f64> as AbstractDomain<f64>>::from_ball(&[0.0], 1.0, &mut pool);
        let out = InterZono::sigma_tanh_product(&x, &y, &mut pool).unwrap();
        let sb = out.support().concretize();
        let expect = 0.5567785637594793; // sigmoid(1)*tanh(1)
        assert!((sb.lower[0] + expect).abs() < 1e-12);
        assert!((sb.upper[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn activation_output_tighter_than_zonotope_only() {
        // Transformer-level tightness: identical input, refined bounds; the
        // intersection width never exceeds the plain zonotope width.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = 3;
            let center: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            let radius = rng.random_range(0.01..1.2);

            let mut pool_z = NoisePool::new();
            let z = Zonotope::from_ball(&center, radius, &mut pool_z);
            let z_out = z.activation(Activation::Tanh, &mut pool_z).unwrap();
            let zb = z_out.bounds().unwrap();

            let mut pool_d = NoisePool::new();
            let d = <InterZono<f64> as AbstractDomain<f64>>::from_ball(&center, radius, &mut pool_d);
            let d_out = d.activation(Activation::Tanh, &mut pool_d).unwrap();
            let db = d_out.bounds().unwrap();

            for j in 0..n {
                let dw = db.upper[j] - db.lower[j];
                let zw = zb.upper[j] - zb.lower[j];
                assert!(dw <= zw + 1e-12, "width {dw} > {zw} at {j}");
                // Intersection is inside both members.
                let mb = d_out.main().concretize();
                let sb = d_out.support().concretize();
                assert!(db.lower[j] >= mb.lower[j] - 1e-12 && db.upper[j] <= mb.upper[j] + 1e-12);
                assert!(db.lower[j] >= sb.lower[j] - 1e-12 && db.upper[j] <= sb.upper[j] + 1e-12);
            }
        }
    }

    #[test]
    fn joint_sampling_lands_inside_product_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut pool = NoisePool::new();
            let n = 2;
            let cx: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cy: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = <InterZono<f64> as AbstractDomain<f64>>::from_ball(&cx, 0.5, &mut pool);
            let y = <InterZono<f64> as AbstractDomain<f64>>::from_ball(&cy, 0.7, &mut pool);
            let out = InterZono::sigma_tanh_product(&x, &y, &mut pool).unwrap();
            let bounds = out.concretize().unwrap();
            for _ in 0..500 {
                let eps: Vec<f64> = (0..pool.allocated())
                    .map(|_| rng.random_range(-1.0..=1.0))
                    .collect();
                let xv = x.main().evaluate(&eps);
                let yv = y.main().evaluate(&eps);
                let v: Vec<f64> = xv
                    .iter()
                    .zip(yv.iter())
                    .map(|(a, b)| crate::scalar::sigmoid_f64(*a) * b.tanh())
                    .collect();
                assert!(bounds.contains(&v, 1e-9));
            }
        }
    }
}
