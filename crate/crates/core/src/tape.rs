//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every scalar operation of one forward pass as a node
//! with its operands, so the pass can be replayed forward and, more
//! importantly, swept backward to accumulate derivatives with respect to any
//! recorded input. [`Var`] is a `Copy` handle (node index plus cached value)
//! that implements [`Scalar`], which lets the abstract-domain pipeline run
//! unchanged in differentiable mode.
//!
//! The active tape is thread-local: a [`TapeScope`] guard installs a tape for
//! the current thread and restores the previous one on drop. Tapes are
//! per-sample and never shared across threads, which keeps parallel gradient
//! accumulation deterministic (each sample records on its own tape).
//!
//! Subgradient conventions: `abs` backpropagates sign(x) with sign(0) = 0;
//! max/min selection happens at record time through [`Scalar::smax`], so the
//! derivative flows through the selected branch with first-argument
//! tie-breaking.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::rc::Rc;

use crate::scalar::{sigmoid_f64, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    /// Leaf introduced by [`Tape::var`]; a differentiation target.
    Input,
    /// Leaf constant created by `Scalar::from_f64`.
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Tanh,
    Sigmoid,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    a: u32,
    b: u32,
    value: f64,
}

type Nodes = Rc<RefCell<Vec<Node>>>;

thread_local! {
    static ACTIVE: RefCell<Option<Nodes>> = const { RefCell::new(None) };
}

/// A recorded scalar computation supporting forward replay and reverse-mode
/// derivative accumulation.
#[derive(Clone, Default)]
pub struct Tape {
    nodes: Nodes,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Rc::new(RefCell::new(Vec::new())),
        }
    }

    /// Installs this tape as the thread's active tape until the guard drops.
    pub fn activate(&self) -> TapeScope {
        let prev = ACTIVE.with(|a| a.borrow_mut().replace(Rc::clone(&self.nodes)));
        TapeScope { prev }
    }

    /// Records a differentiation target (an input leaf).
    pub fn var(&self, value: f64) -> Var {
        push_node(&self.nodes, Op::Input, 0, 0, value)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.borrow().len()
    }

    /// Reverse sweep from `output`; returns the derivative of `output` with
    /// respect to every recorded node.
    pub fn gradients(&self, output: Var) -> Gradients {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0f64; nodes.len()];
        adj[output.idx as usize] = 1.0;
        for (i, node) in nodes.iter().enumerate().rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let a = node.a as usize;
            let b = node.b as usize;
            match node.op {
                Op::Input | Op::Const => {}
                Op::Add => {
                    adj[a] += g;
                    adj[b] += g;
                }
                Op::Sub => {
                    adj[a] += g;
                    adj[b] -= g;
                }
                Op::Mul => {
                    adj[a] += g * nodes[b].value;
                    adj[b] += g * nodes[a].value;
                }
                Op::Div => {
                    let vb = nodes[b].value;
                    adj[a] += g / vb;
                    adj[b] -= g * node.value / vb;
                }
                Op::Neg => adj[a] -= g,
                Op::Tanh => adj[a] += g * (1.0 - node.value * node.value),
                Op::Sigmoid => adj[a] += g * node.value * (1.0 - node.value),
                Op::Exp => adj[a] += g * node.value,
                Op::Ln => adj[a] += g / nodes[a].value,
                Op::Sqrt => adj[a] += g / (2.0 * node.value),
                Op::Abs => {
                    let va = nodes[a].value;
                    let s = if va > 0.0 {
                        1.0
                    } else if va < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    adj[a] += g * s;
                }
            }
        }
        Gradients { adj }
    }

    /// Recomputes every node value forward from the recorded operations.
    /// Returns the recomputed values; leaves reuse their recorded value.
    pub fn replay(&self) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut vals = vec![0.0f64; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            let a = node.a as usize;
            let b = node.b as usize;
            vals[i] = match node.op {
                Op::Input | Op::Const => node.value,
                Op::Add => vals[a] + vals[b],
                Op::Sub => vals[a] - vals[b],
                Op::Mul => vals[a] * vals[b],
                Op::Div => vals[a] / vals[b],
                Op::Neg => -vals[a],
                Op::Tanh => vals[a].tanh(),
                Op::Sigmoid => sigmoid_f64(vals[a]),
                Op::Exp => vals[a].exp(),
                Op::Ln => vals[a].ln(),
                Op::Sqrt => vals[a].sqrt(),
                Op::Abs => vals[a].abs(),
            };
        }
        vals
    }
}

/// Guard returned by [`Tape::activate`]; restores the previously active tape
/// on drop.
pub struct TapeScope {
    prev: Option<Nodes>,
}

impl Drop for TapeScope {
    fn drop(&mut self) {
        let prev = self.prev.take();
        ACTIVE.with(|a| *a.borrow_mut() = prev);
    }
}

/// A scalar recorded on the active tape. `Copy`, so it can flow through the
/// same vector code as `f64`.
#[derive(Debug, Clone, Copy)]
pub struct Var {
    idx: u32,
    value: f64,
}

impl Var {
    pub fn value(self) -> f64 {
        self.value
    }
}

/// Derivatives of one output with respect to every node of a tape.
pub struct Gradients {
    adj: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> f64 {
        self.adj[v.idx as usize]
    }
}

fn push_node(nodes: &Nodes, op: Op, a: u32, b: u32, value: f64) -> Var {
    let mut n = nodes.borrow_mut();
    let idx = n.len() as u32;
    n.push(Node { op, a, b, value });
    Var { idx, value }
}

fn with_active<R>(f: impl FnOnce(&Nodes) -> R) -> R {
    ACTIVE.with(|a| {
        let borrow = a.borrow();
        let nodes = borrow
            .as_ref()
            .expect("tape operation outside an active TapeScope");
        f(nodes)
    })
}

fn unary(op: Op, x: Var, value: f64) -> Var {
    with_active(|nodes| push_node(nodes, op, x.idx, 0, value))
}

fn binary(op: Op, x: Var, y: Var, value: f64) -> Var {
    with_active(|nodes| push_node(nodes, op, x.idx, y.idx, value))
}

impl Add for Var {
    type Output = Var;
    fn add(self, rhs: Var) -> Var {
        binary(Op::Add, self, rhs, self.value + rhs.value)
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, rhs: Var) -> Var {
        binary(Op::Sub, self, rhs, self.value - rhs.value)
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, rhs: Var) -> Var {
        binary(Op::Mul, self, rhs, self.value * rhs.value)
    }
}

impl Div for Var {
    type Output = Var;
    fn div(self, rhs: Var) -> Var {
        binary(Op::Div, self, rhs, self.value / rhs.value)
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        unary(Op::Neg, self, -self.value)
    }
}

impl Scalar for Var {
    fn from_f64(v: f64) -> Self {
        with_active(|nodes| push_node(nodes, Op::Const, 0, 0, v))
    }

    fn val(self) -> f64 {
        self.value
    }

    fn tanh(self) -> Self {
        unary(Op::Tanh, self, self.value.tanh())
    }

    fn sigmoid(self) -> Self {
        unary(Op::Sigmoid, self, sigmoid_f64(self.value))
    }

    fn exp(self) -> Self {
        unary(Op::Exp, self, self.value.exp())
    }

    fn ln(self) -> Self {
        unary(Op::Ln, self, self.value.ln())
    }

    fn sqrt(self) -> Self {
        unary(Op::Sqrt, self, self.value.sqrt())
    }

    fn abs(self) -> Self {
        unary(Op::Abs, self, self.value.abs())
    }
}
