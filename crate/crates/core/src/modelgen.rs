//! Seeded random model and input generation for harnesses and searches.

use rand::Rng;

use crate::cell::{CellKind, CellWeights, GateWeights, Model, OutputLayer};
use crate::math::Matrix;

pub fn random_gate(rng: &mut impl Rng, hidden: usize, input: usize, scale: f64) -> GateWeights<f64> {
    let mut mat = |r: usize, c: usize| -> Matrix<f64> {
        Matrix::new(r, c, (0..r * c).map(|_| rng.random_range(-scale..scale)).collect())
    };
    let w_x = mat(hidden, input);
    let w_h = mat(hidden, hidden);
    GateWeights {
        w_x,
        b_x: (0..hidden).map(|_| rng.random_range(-scale..scale)).collect(),
        w_h,
        b_h: (0..hidden).map(|_| rng.random_range(-scale..scale)).collect(),
    }
}

/// A model with uniform random weights in [-scale, scale].
pub fn random_model(
    rng: &mut impl Rng,
    kind: CellKind,
    input: usize,
    hidden: usize,
    classes: usize,
    scale: f64,
) -> Model<f64> {
    let cell = match kind {
        CellKind::Vanilla => CellWeights::Vanilla(random_gate(rng, hidden, input, scale)),
        CellKind::Lstm => CellWeights::Lstm {
            input: random_gate(rng, hidden, input, scale),
            forget: random_gate(rng, hidden, input, scale),
            cell: random_gate(rng, hidden, input, scale),
            output: random_gate(rng, hidden, input, scale),
        },
        CellKind::Gru => CellWeights::Gru {
            reset: random_gate(rng, hidden, input, scale),
            update: random_gate(rng, hidden, input, scale),
            candidate: random_gate(rng, hidden, input, scale),
        },
    };
    let output = OutputLayer {
        w: Matrix::new(
            classes,
            hidden,
            (0..classes * hidden).map(|_| rng.random_range(-scale..scale)).collect(),
        ),
        b: (0..classes).map(|_| rng.random_range(-scale..scale)).collect(),
    };
    let model = Model { cell, output };
    model.validate().expect("generated model is well-formed");
    model
}

/// Uniform random frames in [-range, range]^d.
pub fn random_frames(rng: &mut impl Rng, t: usize, d: usize, range: f64) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| (0..d).map(|_| rng.random_range(-range..range)).collect())
        .collect()
}
