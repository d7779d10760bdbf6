//! Scalar reverse-mode automatic differentiation.
//!
//! Every operation appends a node to a [`Tape`] together with the local
//! partial derivatives of its result with respect to its arguments. A single
//! backward sweep over the node list then yields the adjoint of every node.
//!
//! Besides the usual scalar arithmetic the tape has a dedicated
//! linear-combination node, so that quadrature sums and triangular solves
//! against constant matrices are recorded as one node per output instead of
//! one node per term.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

#[derive(Debug, Clone)]
enum Node {
    Leaf,
    Unary {
        arg: usize,
        partial: f64,
    },
    Binary {
        lhs: usize,
        rhs: usize,
        d_lhs: f64,
        d_rhs: f64,
    },
    Linear {
        args: Arc<[usize]>,
        coeffs: Arc<[f64]>,
    },
}

/// Recording of a scalar computation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    /// New independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        Var {
            tape: self,
            index: self.push(Node::Leaf),
            value,
        }
    }

    /// A value the computation does not depend on differentiably. It is
    /// recorded as a leaf whose adjoint is simply never read.
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.var(value)
    }

    /// `offset + Σ coeffs[i] · args[i]`.
    pub fn linear_combination<'t>(
        &'t self,
        args: &[Var<'t>],
        coeffs: Arc<[f64]>,
        offset: f64,
    ) -> Var<'t> {
        assert_eq!(args.len(), coeffs.len(), "linear combination arity");
        let indices: Arc<[usize]> = args.iter().map(|a| a.index).collect();
        self.linear_combination_indexed(args, indices, coeffs, offset)
    }

    /// Applies a constant matrix (given row by row) to a shared argument list:
    /// `out[r] = offsets[r] + Σ rows[r][i] · args[i]`.
    pub fn linear_map<'t>(
        &'t self,
        args: &[Var<'t>],
        rows: &[Arc<[f64]>],
        offsets: &[f64],
    ) -> Vec<Var<'t>> {
        assert_eq!(rows.len(), offsets.len(), "linear map offsets");
        let indices: Arc<[usize]> = args.iter().map(|a| a.index).collect();
        rows.iter()
            .zip(offsets)
            .map(|(row, &offset)| {
                assert_eq!(row.len(), args.len(), "linear map row width");
                self.linear_combination_indexed(args, indices.clone(), row.clone(), offset)
            })
            .collect()
    }

    fn linear_combination_indexed<'t>(
        &'t self,
        args: &[Var<'t>],
        indices: Arc<[usize]>,
        coeffs: Arc<[f64]>,
        offset: f64,
    ) -> Var<'t> {
        let value = args
            .iter()
            .zip(coeffs.iter())
            .fold(offset, |acc, (a, &c)| acc + c * a.value);
        let index = self.push(Node::Linear {
            args: indices,
            coeffs,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// A node whose value and local partial derivatives are supplied by the
    /// caller, for closed-form gradients of composite operations.
    pub fn custom<'t>(&'t self, args: &[Var<'t>], value: f64, partials: Vec<f64>) -> Var<'t> {
        assert_eq!(args.len(), partials.len(), "custom node arity");
        let index = self.push(Node::Linear {
            args: args.iter().map(|a| a.index).collect(),
            coeffs: partials.into(),
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Sum of the given variables.
    pub fn sum<'t>(&'t self, args: &[Var<'t>]) -> Var<'t> {
        let ones: Arc<[f64]> = vec![1.0; args.len()].into();
        self.linear_combination(args, ones, 0.0)
    }

    fn unary(&self, arg: &Var<'_>, value: f64, partial: f64) -> Var<'_> {
        Var {
            tape: self,
            index: self.push(Node::Unary {
                arg: arg.index,
                partial,
            }),
            value,
        }
    }

    fn binary<'t>(&'t self, lhs: &Var<'t>, rhs: &Var<'t>, value: f64, d_lhs: f64, d_rhs: f64) -> Var<'t> {
        Var {
            tape: self,
            index: self.push(Node::Binary {
                lhs: lhs.index,
                rhs: rhs.index,
                d_lhs,
                d_rhs,
            }),
            value,
        }
    }

    /// Reverse sweep seeded with `d output / d output = 1`.
    fn adjoints(&self, output: usize) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[output] = 1.0;
        for i in (0..=output).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            match &nodes[i] {
                Node::Leaf => {}
                Node::Unary { arg, partial } => adj[*arg] += a * partial,
                Node::Binary {
                    lhs,
                    rhs,
                    d_lhs,
                    d_rhs,
                } => {
                    adj[*lhs] += a * d_lhs;
                    adj[*rhs] += a * d_rhs;
                }
                Node::Linear { args, coeffs } => {
                    for (&j, &c) in args.iter().zip(coeffs.iter()) {
                        adj[j] += a * c;
                    }
                }
            }
        }
        adj
    }
}

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("index", &self.index)
            .field("value", &self.value)
            .finish()
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.tape.unary(&self, t, 1.0 - t * t)
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.tape.unary(&self, s, 0.5 / s)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.tape.unary(&self, e, e)
    }

    pub fn square(self) -> Self {
        self.tape
            .unary(&self, self.value * self.value, 2.0 * self.value)
    }

    pub fn powi(self, n: i32) -> Self {
        let p = self.value.powi(n);
        let d = if n == 0 {
            0.0
        } else {
            f64::from(n) * self.value.powi(n - 1)
        };
        self.tape.unary(&self, p, d)
    }

    /// Adjoints of every node with respect to this output.
    pub fn backward(&self) -> Gradients {
        Gradients {
            adjoints: self.tape.adjoints(self.index),
        }
    }
}

/// Result of a reverse sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, var: &Var<'_>) -> f64 {
        self.adjoints.get(var.index).copied().unwrap_or(0.0)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .binary(&self, &rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .binary(&self, &rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .binary(&self, &rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self.value / rhs.value;
        self.tape
            .binary(&self, &rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(&self, -self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.tape.unary(&self, self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.tape.unary(&self, self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.tape.unary(&self, self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.tape.unary(&self, self.value / rhs, 1.0 / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.tape.unary(&rhs, self - rhs.value, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = tape.var(-2.0);
        let z = x * y + x.square();
        let g = z.backward();
        assert_eq!(z.value(), 3.0);
        assert_eq!(g.wrt(&x), -2.0 + 6.0);
        assert_eq!(g.wrt(&y), 3.0);
    }

    #[test]
    fn quotient_and_tanh() {
        let tape = Tape::new();
        let x = tape.var(0.7);
        let z = (x.tanh() / (x + 1.0)).sqrt();
        let g = z.backward();
        let f = |x: f64| (x.tanh() / (x + 1.0)).sqrt();
        let h = 1e-6;
        let fd = (f(0.7 + h) - f(0.7 - h)) / (2.0 * h);
        assert!((g.wrt(&x) - fd).abs() < 1e-8);
    }

    #[test]
    fn linear_map_shares_arguments() {
        let tape = Tape::new();
        let xs: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&v| tape.var(v)).collect();
        let rows: Vec<Arc<[f64]>> = vec![vec![1.0, 0.0, -1.0].into(), vec![0.5, 0.5, 0.5].into()];
        let ys = tape.linear_map(&xs, &rows, &[10.0, 0.0]);
        assert_eq!(ys[0].value(), 8.0);
        assert_eq!(ys[1].value(), 3.0);
        let out = ys[0] * ys[1];
        let g = out.backward();
        assert_eq!(g.wrt(&xs[0]), 3.0 + 0.5 * 8.0);
        assert_eq!(g.wrt(&xs[1]), 0.5 * 8.0);
        assert_eq!(g.wrt(&xs[2]), -3.0 + 0.5 * 8.0);
    }

    #[test]
    fn repeated_use_accumulates() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let z = x * x * x;
        assert_eq!(z.backward().wrt(&x), 12.0);
        let w = 1.0 - x.powi(3) * 2.0;
        assert_eq!(w.value(), -15.0);
        assert_eq!(w.backward().wrt(&x), -24.0);
    }
}
