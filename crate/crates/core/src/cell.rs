//! Recurrent cells and their concrete and abstract forward propagation.
//!
//! Three cell kinds are supported. Writing h for the hidden state, x for the
//! current frame and sigma for the logistic function:
//!
//! - vanilla:  h' = tanh(Wx x + bx + Wh h + bh)
//! - LSTM:     i, f, o = sigma(gate pre-activations), g = tanh(...),
//!             c' = f (.) c + i (.) g,  h' = o (.) tanh(c')
//! - GRU:      r, z = sigma(...), n = tanh(Wxn x + bxn + r (.) (Whn h + bhn)),
//!             h' = (1 - z) (.) n + z (.) h
//!
//! The classifier readout is y = Wo h_T + bo on the final hidden state.
//!
//! Abstract propagation composes the domain transformers: affine maps for the
//! pre-activations and readout, the joint sigmoid-tanh transformer for the
//! i (.) g and o (.) tanh(c') patterns (applied to pre-activations), and the
//! generic Hadamard transformer for the remaining products.

use crate::domain::{AbstractDomain, Activation, NoisePool};
use crate::error::DomainError;
use crate::math::{add_vec, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Vanilla,
    Lstm,
    Gru,
}

impl CellKind {
    pub fn name(self) -> &'static str {
        match self {
            CellKind::Vanilla => "vanilla",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

/// One gate's weights: W_x (hidden x input), b_x, W_h (hidden x hidden), b_h.
#[derive(Debug, Clone)]
pub struct GateWeights<S> {
    pub w_x: Matrix<S>,
    pub b_x: Vec<S>,
    pub w_h: Matrix<S>,
    pub b_h: Vec<S>,
}

impl<S: Scalar> GateWeights<S> {
    fn validate(&self, hidden: usize, input: usize) -> Result<(), DomainError> {
        self.w_x.check_shape("gate W_x", hidden, input)?;
        self.w_h.check_shape("gate W_h", hidden, hidden)?;
        if self.b_x.len() != hidden {
            return Err(DomainError::dim("gate b_x", hidden, self.b_x.len()));
        }
        if self.b_h.len() != hidden {
            return Err(DomainError::dim("gate b_h", hidden, self.b_h.len()));
        }
        Ok(())
    }

    fn map<T: Scalar>(&self, f: &mut impl FnMut(S) -> T) -> GateWeights<T> {
        GateWeights {
            w_x: self.w_x.map(&mut *f),
            b_x: self.b_x.iter().map(|&v| f(v)).collect(),
            w_h: self.w_h.map(&mut *f),
            b_h: self.b_h.iter().map(|&v| f(v)).collect(),
        }
    }

    fn visit(&self, out: &mut Vec<S>) {
        out.extend_from_slice(self.w_x.data());
        out.extend_from_slice(&self.b_x);
        out.extend_from_slice(self.w_h.data());
        out.extend_from_slice(&self.b_h);
    }

    fn take(hidden: usize, input: usize, it: &mut impl Iterator<Item = S>) -> GateWeights<S> {
        let grab = |it: &mut dyn Iterator<Item = S>, n: usize| -> Vec<S> {
            it.take(n).collect()
        };
        GateWeights {
            w_x: Matrix::new(hidden, input, grab(it, hidden * input)),
            b_x: grab(it, hidden),
            w_h: Matrix::new(hidden, hidden, grab(it, hidden * hidden)),
            b_h: grab(it, hidden),
        }
    }

    /// Concrete pre-activation W_x x + b_x + W_h h + b_h.
    fn pre(&self, x: &[S], h: &[S]) -> Vec<S> {
        let mut out = self.w_x.matvec(x);
        let hh = self.w_h.matvec(h);
        for j in 0..out.len() {
            out[j] = out[j] + self.b_x[j] + hh[j] + self.b_h[j];
        }
        out
    }

    /// Abstract pre-activation: exact affine maps and an exact sum.
    fn pre_abstract<D: AbstractDomain<S>>(
        &self,
        x: &D,
        h: &D,
        pool: &mut NoisePool,
    ) -> Result<D, DomainError> {
        let from_x = x.affine(&self.w_x, &self.b_x)?;
        let from_h = h.affine(&self.w_h, &self.b_h)?;
        from_x.add(&from_h, pool)
    }
}

#[derive(Debug, Clone)]
pub enum CellWeights<S> {
    Vanilla(GateWeights<S>),
    Lstm {
        input: GateWeights<S>,
        forget: GateWeights<S>,
        cell: GateWeights<S>,
        output: GateWeights<S>,
    },
    Gru {
        reset: GateWeights<S>,
        update: GateWeights<S>,
        candidate: GateWeights<S>,
    },
}

impl<S: Scalar> CellWeights<S> {
    pub fn kind(&self) -> CellKind {
        match self {
            CellWeights::Vanilla(_) => CellKind::Vanilla,
            CellWeights::Lstm { .. } => CellKind::Lstm,
            CellWeights::Gru { .. } => CellKind::Gru,
        }
    }

    pub fn hidden_size(&self) -> usize {
        match self {
            CellWeights::Vanilla(g) => g.w_x.rows(),
            CellWeights::Lstm { input, .. } => input.w_x.rows(),
            CellWeights::Gru { reset, .. } => reset.w_x.rows(),
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            CellWeights::Vanilla(g) => g.w_x.cols(),
            CellWeights::Lstm { input, .. } => input.w_x.cols(),
            CellWeights::Gru { reset, .. } => reset.w_x.cols(),
        }
    }

    fn gates(&self) -> Vec<&GateWeights<S>> {
        match self {
            CellWeights::Vanilla(g) => vec![g],
            CellWeights::Lstm {
                input,
                forget,
                cell,
                output,
            } => vec![input, forget, cell, output],
            CellWeights::Gru {
                reset,
                update,
                candidate,
            } => vec![reset, update, candidate],
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let hidden = self.hidden_size();
        let input = self.input_size();
        for g in self.gates() {
            g.validate(hidden, input)?;
        }
        Ok(())
    }

    pub fn map<T: Scalar>(&self, mut f: impl FnMut(S) -> T) -> CellWeights<T> {
        match self {
            CellWeights::Vanilla(g) => CellWeights::Vanilla(g.map(&mut f)),
            CellWeights::Lstm {
                input,
                forget,
                cell,
                output,
            } => CellWeights::Lstm {
                input: input.map(&mut f),
                forget: forget.map(&mut f),
                cell: cell.map(&mut f),
                output: output.map(&mut f),
            },
            CellWeights::Gru {
                reset,
                update,
                candidate,
            } => CellWeights::Gru {
                reset: reset.map(&mut f),
                update: update.map(&mut f),
                candidate: candidate.map(&mut f),
            },
        }
    }
}

/// Readout layer: logits = W h_T + b, with one row per class.
#[derive(Debug, Clone)]
pub struct OutputLayer<S> {
    pub w: Matrix<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> OutputLayer<S> {
    pub fn class_count(&self) -> usize {
        self.w.rows()
    }

    pub fn map<T: Scalar>(&self, mut f: impl FnMut(S) -> T) -> OutputLayer<T> {
        OutputLayer {
            w: self.w.map(&mut f),
            b: self.b.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model<S> {
    pub cell: CellWeights<S>,
    pub output: OutputLayer<S>,
}

impl<S: Scalar> Model<S> {
    pub fn kind(&self) -> CellKind {
        self.cell.kind()
    }

    pub fn hidden_size(&self) -> usize {
        self.cell.hidden_size()
    }

    pub fn input_size(&self) -> usize {
        self.cell.input_size()
    }

    pub fn class_count(&self) -> usize {
        self.output.class_count()
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        self.cell.validate()?;
        self.output
            .w
            .check_shape("output W", self.class_count(), self.hidden_size())?;
        if self.output.b.len() != self.class_count() {
            return Err(DomainError::dim(
                "output b",
                self.class_count(),
                self.output.b.len(),
            ));
        }
        if self.class_count() < 2 {
            return Err(DomainError::dim("class count", 2, self.class_count()));
        }
        Ok(())
    }

    /// Canonical flat parameter order: gates in declaration order, each as
    /// W_x, b_x, W_h, b_h row-major, then the readout W, b.
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::new();
        for g in self.cell.gates() {
            g.visit(&mut out);
        }
        out.extend_from_slice(self.output.w.data());
        out.extend_from_slice(&self.output.b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.flatten().len()
    }

    /// Rebuilds a model with the same shape from a flat parameter vector in
    /// canonical order; the scalar type may change.
    pub fn from_flat<T: Scalar>(&self, params: &[T]) -> Model<T> {
        let hidden = self.hidden_size();
        let input = self.input_size();
        let classes = self.class_count();
        let mut it = params.iter().copied();
        let cell = match self.cell {
            CellWeights::Vanilla(_) => {
                CellWeights::Vanilla(GateWeights::take(hidden, input, &mut it))
            }
            CellWeights::Lstm { .. } => CellWeights::Lstm {
                input: GateWeights::take(hidden, input, &mut it),
                forget: GateWeights::take(hidden, input, &mut it),
                cell: GateWeights::take(hidden, input, &mut it),
                output: GateWeights::take(hidden, input, &mut it),
            },
            CellWeights::Gru { .. } => CellWeights::Gru {
                reset: GateWeights::take(hidden, input, &mut it),
                update: GateWeights::take(hidden, input, &mut it),
                candidate: GateWeights::take(hidden, input, &mut it),
            },
        };
        let w: Vec<T> = (&mut it).take(classes * hidden).collect();
        let b: Vec<T> = (&mut it).take(classes).collect();
        debug_assert!(it.next().is_none(), "parameter vector too long");
        Model {
            cell,
            output: OutputLayer {
                w: Matrix::new(classes, hidden, w),
                b,
            },
        }
    }

    pub fn map<T: Scalar>(&self, mut f: impl FnMut(S) -> T) -> Model<T> {
        Model {
            cell: self.cell.map(&mut f),
            output: self.output.map(&mut f),
        }
    }
}

/// Hidden (and for LSTM, cell) state in a chosen abstract domain.
#[derive(Debug, Clone)]
pub struct AbstractState<D> {
    pub h: D,
    pub c: Option<D>,
}

/// One concrete cell update; `c` must be present exactly for LSTM cells.
pub fn cell_step<S: Scalar>(
    weights: &CellWeights<S>,
    x: &[S],
    h: &[S],
    c: Option<&[S]>,
) -> (Vec<S>, Option<Vec<S>>) {
    match weights {
        CellWeights::Vanilla(g) => {
            let pre = g.pre(x, h);
            (pre.into_iter().map(|v| v.tanh()).collect(), None)
        }
        CellWeights::Lstm {
            input,
            forget,
            cell,
            output,
        } => {
            let c = c.expect("LSTM step requires a cell state");
            let i: Vec<S> = input.pre(x, h).into_iter().map(|v| v.sigmoid()).collect();
            let f: Vec<S> = forget.pre(x, h).into_iter().map(|v| v.sigmoid()).collect();
            let g: Vec<S> = cell.pre(x, h).into_iter().map(|v| v.tanh()).collect();
            let o: Vec<S> = output.pre(x, h).into_iter().map(|v| v.sigmoid()).collect();
            let c_next: Vec<S> = (0..c.len()).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
            let h_next: Vec<S> = (0..c.len()).map(|j| o[j] * c_next[j].tanh()).collect();
            (h_next, Some(c_next))
        }
        CellWeights::Gru {
            reset,
            update,
            candidate,
        } => {
            let r: Vec<S> = reset.pre(x, h).into_iter().map(|v| v.sigmoid()).collect();
            let z: Vec<S> = update.pre(x, h).into_iter().map(|v| v.sigmoid()).collect();
            let mut hv = candidate.w_h.matvec(h);
            for j in 0..hv.len() {
                hv[j] = hv[j] + candidate.b_h[j];
            }
            let mut pre_n = candidate.w_x.matvec(x);
            for j in 0..pre_n.len() {
                pre_n[j] = pre_n[j] + candidate.b_x[j] + r[j] * hv[j];
            }
            let n: Vec<S> = pre_n.into_iter().map(|v| v.tanh()).collect();
            let h_next: Vec<S> = (0..n.len())
                .map(|j| (S::one() - z[j]) * n[j] + z[j] * h[j])
                .collect();
            (h_next, None)
        }
    }
}

/// Concrete forward pass from the zero initial state; returns the logits.
pub fn forward_logits<S: Scalar>(model: &Model<S>, frames: &[Vec<S>]) -> Vec<S> {
    assert!(!frames.is_empty(), "empty input sequence");
    let hidden = model.hidden_size();
    let mut h = vec![S::zero(); hidden];
    let mut c = match model.kind() {
        CellKind::Lstm => Some(vec![S::zero(); hidden]),
        _ => None,
    };
    for x in frames {
        let (h2, c2) = cell_step(&model.cell, x, &h, c.as_deref());
        h = h2;
        c = c2;
    }
    add_vec(&model.output.w.matvec(&h), &model.output.b)
}

/// One abstract cell update composing the domain transformers.
pub fn cell_step_abstract<S: Scalar, D: AbstractDomain<S>>(
    weights: &CellWeights<S>,
    x: &D,
    state: &AbstractState<D>,
    pool: &mut NoisePool,
) -> Result<AbstractState<D>, DomainError> {
    match weights {
        CellWeights::Vanilla(g) => {
            let pre = g.pre_abstract(x, &state.h, pool)?;
            Ok(AbstractState {
                h: pre.activation(Activation::Tanh, pool)?,
                c: None,
            })
        }
        CellWeights::Lstm {
            input,
            forget,
            cell,
            output,
        } => {
            let c_prev = state.c.as_ref().expect("LSTM state requires a cell value");
            let pre_i = input.pre_abstract(x, &state.h, pool)?;
            let pre_f = forget.pre_abstract(x, &state.h, pool)?;
            let pre_g = cell.pre_abstract(x, &state.h, pool)?;
            let pre_o = output.pre_abstract(x, &state.h, pool)?;

            let f = pre_f.activation(Activation::Sigmoid, pool)?;
            let ig = D::sigma_tanh_product(&pre_i, &pre_g, pool)?;
            let fc = D::hadamard(&f, c_prev, pool)?;
            let c_next = fc.add(&ig, pool)?;
            let h_next = D::sigma_tanh_product(&pre_o, &c_next, pool)?;
            Ok(AbstractState {
                h: h_next,
                c: Some(c_next),
            })
        }
        CellWeights::Gru {
            reset,
            update,
            candidate,
        } => {
            let r = reset
                .pre_abstract(x, &state.h, pool)?
                .activation(Activation::Sigmoid, pool)?;
            let z = update
                .pre_abstract(x, &state.h, pool)?
                .activation(Activation::Sigmoid, pool)?;
            let hv = state.h.affine(&candidate.w_h, &candidate.b_h)?;
            let rv = D::hadamard(&r, &hv, pool)?;
            let pre_n = x.affine(&candidate.w_x, &candidate.b_x)?.add(&rv, pool)?;
            let n = pre_n.activation(Activation::Tanh, pool)?;
            let zh = D::hadamard(&z, &state.h, pool)?;
            let zn = D::hadamard(&z.one_minus(), &n, pool)?;
            Ok(AbstractState {
                h: zn.add(&zh, pool)?,
                c: None,
            })
        }
    }
}

/// Abstract forward pass from the zero point state; returns the logit domain.
pub fn forward_abstract<S: Scalar, D: AbstractDomain<S>>(
    model: &Model<S>,
    frames: &[D],
    pool: &mut NoisePool,
) -> Result<D, DomainError> {
    assert!(!frames.is_empty(), "empty input sequence");
    let hidden = model.hidden_size();
    let zero = vec![S::zero(); hidden];
    let mut state = AbstractState {
        h: D::point(zero.clone()),
        c: match model.kind() {
            CellKind::Lstm => Some(D::point(zero)),
            _ => None,
        },
    };
    for x in frames {
        state = cell_step_abstract(&model.cell, x, &state, pool)?;
    }
    state.h.affine(&model.output.w, &model.output.b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{InterZono, Zonotope};
    use crate::modelgen::random_model;
    use crate::scalar::sigmoid_f64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight-line re-evaluation of the GRU equations, kept deliberately
    /// separate from the implementation (explicit index loops, no helpers).
    fn gru_oracle(m: &Model<f64>, frames: &[Vec<f64>]) -> Vec<f64> {
        let (reset, update, candidate) = match &m.cell {
            CellWeights::Gru {
                reset,
                update,
                candidate,
            } => (reset, update, candidate),
            _ => unreachable!(),
        };
        let hsz = m.hidden_size();
        let isz = m.input_size();
        let mut h = vec![0.0; hsz];
        for x in frames {
            let mut h_next = vec![0.0; hsz];
            for j in 0..hsz {
                let mut pre_r = reset.b_x[j] + reset.b_h[j];
                let mut pre_z = update.b_x[j] + update.b_h[j];
                for k in 0..isz {
                    pre_r += reset.w_x.get(j, k) * x[k];
                    pre_z += update.w_x.get(j, k) * x[k];
                }
                for k in 0..hsz {
                    pre_r += reset.w_h.get(j, k) * h[k];
                    pre_z += update.w_h.get(j, k) * h[k];
                }
                let r = sigmoid_f64(pre_r);
                let z = sigmoid_f64(pre_z);
                let mut inner = candidate.b_h[j];
                for k in 0..hsz {
                    inner += candidate.w_h.get(j, k) * h[k];
                }
                let mut pre_n = candidate.b_x[j] + r * inner;
                for k in 0..isz {
                    pre_n += candidate.w_x.get(j, k) * x[k];
                }
                let n = pre_n.tanh();
                h_next[j] = (1.0 - z) * n + z * h[j];
            }
            h = h_next;
        }
        let mut y = vec![0.0; m.class_count()];
        for c in 0..m.class_count() {
            y[c] = m.output.b[c];
            for k in 0..hsz {
                y[c] += m.output.w.get(c, k) * h[k];
            }
        }
        y
    }

    /// Same for the LSTM equations.
    fn lstm_oracle(m: &Model<f64>, frames: &[Vec<f64>]) -> Vec<f64> {
        let (gi, gf, gg, go) = match &m.cell {
            CellWeights::Lstm {
                input,
                forget,
                cell,
                output,
            } => (input, forget, cell, output),
            _ => unreachable!(),
        };
        let hsz = m.hidden_size();
        let isz = m.input_size();
        let mut h = vec![0.0; hsz];
        let mut c = vec![0.0; hsz];
        for x in frames {
            let mut h2 = vec![0.0; hsz];
            let mut c2 = vec![0.0; hsz];
            for j in 0..hsz {
                let pre = |g: &GateWeights<f64>| {
                    let mut p = g.b_x[j] + g.b_h[j];
                    for k in 0..isz {
                        p += g.w_x.get(j, k) * x[k];
                    }
                    for k in 0..hsz {
                        p += g.w_h.get(j, k) * h[k];
                    }
                    p
                };
                let i = sigmoid_f64(pre(gi));
                let f = sigmoid_f64(pre(gf));
                let g = pre(gg).tanh();
                let o = sigmoid_f64(pre(go));
                c2[j] = f * c[j] + i * g;
                h2[j] = o * c2[j].tanh();
            }
            h = h2;
            c = c2;
        }
        let mut y = vec![0.0; m.class_count()];
        for cl in 0..m.class_count() {
            y[cl] = m.output.b[cl];
            for k in 0..hsz {
                y[cl] += m.output.w.get(cl, k) * h[k];
            }
        }
        y
    }

    #[test]
    fn zero_vanilla_cell_has_zero_fixed_point() {
        let g = GateWeights {
            w_x: Matrix::<f64>::zeros(2, 3),
            b_x: vec![0.0; 2],
            w_h: Matrix::zeros(2, 2),
            b_h: vec![0.0; 2],
        };
        let (h, c) = cell_step(&CellWeights::Vanilla(g), &[0.0; 3], &[0.0; 2], None);
        assert_eq!(h, vec![0.0, 0.0]);
        assert!(c.is_none());
    }

    #[test]
    fn zero_lstm_cell_stays_at_zero() {
        let zero_gate = || GateWeights {
            w_x: Matrix::<f64>::zeros(2, 2),
            b_x: vec![0.0; 2],
            w_h: Matrix::zeros(2, 2),
            b_h: vec![0.0; 2],
        };
        let cell = CellWeights::Lstm {
            input: zero_gate(),
            forget: zero_gate(),
            cell: zero_gate(),
            output: zero_gate(),
        };
        let (h, c) = cell_step(&cell, &[0.0; 2], &[0.0; 2], Some(&[0.0; 2]));
        assert_eq!(h, vec![0.0; 2]);
        assert_eq!(c.unwrap(), vec![0.0; 2]);
    }

    #[test]
    fn gru_matches_straight_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let m = random_model(&mut rng, CellKind::Gru, 3, 3, 2, 1.0);
            let frames: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let got = forward_logits(&m, &frames);
            let want = gru_oracle(&m, &frames);
            for (a, b) in got.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lstm_matches_straight_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let m = random_model(&mut rng, CellKind::Lstm, 2, 3, 3, 1.0);
            let frames: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let got = forward_logits(&m, &frames);
            let want = lstm_oracle(&m, &frames);
            for (a, b) in got.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_step_vanilla_unrolls_as_expected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_model(&mut rng, CellKind::Vanilla, 2, 2, 2, 0.8);
        let x: Vec<f64> = vec![0.3, -0.7];
        let logits = forward_logits(&m, &[x.clone()]);
        let g = match &m.cell {
            CellWeights::Vanilla(g) => g,
            _ => unreachable!(),
        };
        let pre = g.pre(&x, &[0.0, 0.0]);
        let h: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
        let expect = add_vec(&m.output.w.matvec(&h), &m.output.b);
        for (a, b) in logits.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn all_zero_model_outputs_bias() {
        let m = Model {
            cell: CellWeights::Vanilla(GateWeights {
                w_x: Matrix::<f64>::zeros(2, 2),
                b_x: vec![0.0; 2],
                w_h: Matrix::zeros(2, 2),
                b_h: vec![0.0; 2],
            }),
            output: OutputLayer {
                w: Matrix::zeros(2, 2),
                b: vec![0.4, -0.2],
            },
        };
        let logits = forward_logits(&m, &[vec![1.0, 2.0], vec![-1.0, 0.5]]);
        assert_eq!(logits, vec![0.4, -0.2]);
    }

    #[test]
    fn flatten_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for kind in [CellKind::Vanilla, CellKind::Lstm, CellKind::Gru] {
            let m = random_model(&mut rng, kind, 3, 4, 2, 1.0);
            let flat = m.flatten();
            let back = m.from_flat(&flat);
            assert_eq!(back.flatten(), flat);
            let frames = vec![vec![0.1, -0.2, 0.3]];
            assert_eq!(forward_logits(&m, &frames), forward_logits(&back, &frames));
        }
    }

    fn abstract_point_matches_concrete(kind: CellKind) {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = random_model(&mut rng, kind, 2, 3, 2, 1.0);
        let frames: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let concrete = forward_logits(&m, &frames);

        let mut pool = NoisePool::new();
        let domains: Vec<InterZono<f64>> = frames
            .iter()
            .map(|x| <InterZono<f64> as AbstractDomain<f64>>::point(x.clone()))
            .collect();
        let out = forward_abstract(&m, &domains, &mut pool).unwrap();
        let b = out.concretize().unwrap();
        for j in 0..2 {
            assert!((b.lower[j] - concrete[j]).abs() < 1e-9, "{kind:?} lower");
            assert!((b.upper[j] - concrete[j]).abs() < 1e-9, "{kind:?} upper");
        }
    }

    #[test]
    fn abstract_points_collapse_for_all_kinds() {
        abstract_point_matches_concrete(CellKind::Vanilla);
        abstract_point_matches_concrete(CellKind::Lstm);
        abstract_point_matches_concrete(CellKind::Gru);
    }

    fn mc_soundness<D: AbstractDomain<f64>>(kind: CellKind, samples: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let m = random_model(&mut rng, kind, 2, 2, 2, 1.0);
        let eps = 0.1;
        let frames: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut pool = NoisePool::new();
        let domains: Vec<D> = frames
            .iter()
            .map(|x| D::from_ball(x, eps, &mut pool))
            .collect();
        let out = forward_abstract(&m, &domains, &mut pool).unwrap();
        let bounds = out.bounds().unwrap();
        for _ in 0..samples {
            let perturbed: Vec<Vec<f64>> = frames
                .iter()
                .map(|x| {
                    x.iter()
                        .map(|&v| v + rng.random_range(-eps..=eps))
                        .collect()
                })
                .collect();
            let logits = forward_logits(&m, &perturbed);
            assert!(
                bounds.contains(&logits, 1e-9),
                "{kind:?} logits {logits:?} escaped {:?}..{:?}",
                crate::scalar::values(&bounds.lower),
                crate::scalar::values(&bounds.upper)
            );
        }
    }

    #[test]
    fn forward_abstract_contains_joint_samples() {
        mc_soundness::<InterZono<f64>>(CellKind::Vanilla, 10_000);
        mc_soundness::<InterZono<f64>>(CellKind::Lstm, 5_000);
        mc_soundness::<InterZono<f64>>(CellKind::Gru, 5_000);
        mc_soundness::<Zonotope<f64>>(CellKind::Lstm, 5_000);
    }

    #[test]
    fn lstm_step_contains_exhaustive_grid_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let m = random_model(&mut rng, CellKind::Lstm, 2, 2, 2, 1.0);
        let center = vec![0.2, -0.5];
        let eps = 0.15;
        let mut pool = NoisePool::new();
        let dx = <InterZono<f64> as AbstractDomain<f64>>::from_ball(&center, eps, &mut pool);
        let state = AbstractState {
            h: <InterZono<f64> as AbstractDomain<f64>>::point(vec![0.0; 2]),
            c: Some(<InterZono<f64> as AbstractDomain<f64>>::point(vec![0.0; 2])),
        };
        let next = cell_step_abstract(&m.cell, &dx, &state, &mut pool).unwrap();
        let hb = next.h.concretize().unwrap();
        let cb = next.c.unwrap().concretize().unwrap();
        let steps = 17;
        for a in 0..steps {
            for b in 0..steps {
                let x = vec![
                    center[0] - eps + 2.0 * eps * (a as f64) / ((steps - 1) as f64),
                    center[1] - eps + 2.0 * eps * (b as f64) / ((steps - 1) as f64),
                ];
                let (h, c) = cell_step(&m.cell, &x, &[0.0, 0.0], Some(&[0.0, 0.0]));
                assert!(hb.contains(&h, 1e-9));
                assert!(cb.contains(&c.unwrap(), 1e-9));
            }
        }
    }

    #[test]
    fn epsilon_monotonicity_of_output_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let m = random_model(&mut rng, CellKind::Vanilla, 2, 2, 2, 1.0);
        let frames: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2).map(|_| rng.random_range(-0.5..0.5)).collect())
            .collect();
        let run = |eps: f64| {
            let mut pool = NoisePool::new();
            let domains: Vec<InterZono<f64>> = frames
                .iter()
                .map(|x| <InterZono<f64> as AbstractDomain<f64>>::from_ball(x, eps, &mut pool))
                .collect();
            forward_abstract(&m, &domains, &mut pool)
                .unwrap()
                .concretize()
                .unwrap()
        };
        let small = run(0.05);
        let large = run(0.1);
        for j in 0..2 {
            assert!(large.lower[j] <= small.lower[j] + 1e-12);
            assert!(large.upper[j] >= small.upper[j] - 1e-12);
        }
    }

    #[test]
    fn noise_symbol_growth_is_kind_specific() {
        // Per step the main domain gains a fixed multiple of the hidden size:
        // vanilla 1n (tanh), LSTM 4n (sigmoid f, two joint products, one
        // hadamard), GRU 6n (two sigmoids, one tanh, three hadamards).
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for (kind, per_step) in [(CellKind::Vanilla, 1), (CellKind::Lstm, 4), (CellKind::Gru, 6)] {
            let hidden = 3;
            let m = random_model(&mut rng, kind, 2, hidden, 2, 1.0);
            let frames: Vec<Vec<f64>> = (0..3).map(|_| vec![0.1, -0.1]).collect();
            let mut pool = NoisePool::new();
            let mut state = AbstractState {
                h: Zonotope::point(vec![0.0; hidden]),
                c: match kind {
                    CellKind::Lstm => Some(Zonotope::point(vec![0.0; hidden])),
                    _ => None,
                },
            };
            let mut counts = Vec::new();
            let domains: Vec<Zonotope<f64>> = frames
                .iter()
                .map(|x| <Zonotope<f64> as AbstractDomain<f64>>::from_ball(x, 0.1, &mut pool))
                .collect();
            for dx in &domains {
                state = cell_step_abstract(&m.cell, dx, &state, &mut pool).unwrap();
                counts.push(state.h.noise_count());
            }
            // After t steps: t*d input symbols influence h only through the
            // transformers; the main-domain symbol count of h grows by
            // per_step * hidden each step plus the d input symbols folded in.
            for (t, &count) in counts.iter().enumerate() {
                let steps = t + 1;
                let expected = steps * per_step * hidden + steps * 2;
                assert_eq!(
                    count, expected,
                    "{kind:?} at step {steps}: {count} vs {expected}"
                );
            }
        }
    }
}
