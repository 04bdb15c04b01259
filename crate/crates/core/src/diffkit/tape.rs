//! Reverse-mode differentiation over a recorded tape.
//!
//! Every node holds a dense [`Tensor`] so a whole minibatch flows through
//! one node; a scalar is simply a 1×1 node. Nodes are appended in evaluation
//! order, so the recording order is already a valid reverse topological
//! order and [`Tape::backward`] is a single sweep from the output down.
//!
//! Gradients only flow into nodes that (transitively) depend on a leaf;
//! constants and everything computed purely from constants are skipped.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Const,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// `scale * a + shift`, keeping only the scale.
    Affine(Var, f64),
    Tanh(Var),
    Sin(Var),
    Cos(Var),
    Sqrt(Var),
    /// `x · wᵀ` with x: B×in, w: out×in.
    MatMulNT(Var, Var),
    /// `x + 1·b` with b: 1×cols broadcast over rows.
    AddBias(Var, Var),
    Concat(Vec<Var>),
    Col(Var, usize),
    Sum(Var),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Operation recorder. One tape per worker; it is never shared.
#[derive(Default, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// ∂output/∂leaf, or `None` when `leaf` is not a leaf or the output does
    /// not depend on it.
    pub fn get(&self, leaf: Var) -> Option<&Tensor> {
        self.grads.get(leaf.0).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but yields zeros of the leaf's shape when the
    /// output does not depend on it.
    pub fn get_or_zeros(&self, tape: &Tape, leaf: Var) -> Tensor {
        self.get(leaf).cloned().unwrap_or_else(|| {
            let (r, c) = tape.shape(leaf);
            Tensor::zeros(r, c)
        })
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node. Handles from before the reset are invalid.
    pub fn reset(&mut self) {
        self.nodes.clear();
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, op: Op, value: Tensor, parents: &[Var]) -> Var {
        let needs = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.push(op, value, needs)
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> Var {
        self.leaf(Tensor::scalar(value))
    }

    /// Input excluded from differentiation.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Const, value, false)
    }

    /// Constant column of `rows` copies of `value`.
    pub fn filled(&mut self, rows: usize, value: f64) -> Var {
        self.constant(Tensor::filled(rows, 1, value))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn rows(&self, v: Var) -> usize {
        self.nodes[v.0].value.rows()
    }

    pub fn is_leaf(&self, v: Var) -> bool {
        matches!(self.nodes[v.0].op, Op::Leaf)
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.derived(Op::Add(a, b), value, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.derived(Op::Sub(a, b), value, &[a, b])
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.derived(Op::Mul(a, b), value, &[a, b])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x / y);
        self.derived(Op::Div(a, b), value, &[a, b])
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(a).map(|x| scale * x + shift);
        self.derived(Op::Affine(a, scale), value, &[a])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.affine(a, s, 0.0)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.affine(a, -1.0, 0.0)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.derived(Op::Tanh(a), value, &[a])
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::sin);
        self.derived(Op::Sin(a), value, &[a])
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::cos);
        self.derived(Op::Cos(a), value, &[a])
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::sqrt);
        self.derived(Op::Sqrt(a), value, &[a])
    }

    /// `x · wᵀ`, the affine-layer product for weights stored out×in.
    pub fn matmul_nt(&mut self, x: Var, w: Var) -> Var {
        let (b, k) = self.shape(x);
        let (n, k2) = self.shape(w);
        assert_eq!(k, k2, "matmul inner dimension mismatch");
        let mut out = vec![0.0; b * n];
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        gemm(b, k, n, xv, k as isize, 1, wv, 1, k as isize, &mut out, 0.0);
        self.derived(Op::MatMulNT(x, w), Tensor::new(b, n, out), &[x, w])
    }

    /// Adds the 1×cols row `bias` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(bias), (1, c), "bias shape mismatch");
        let bv = self.value(bias).data().to_vec();
        let mut value = self.value(x).clone();
        for row in value.data_mut().chunks_mut(c.max(1)) {
            for (v, b) in row.iter_mut().zip(&bv) {
                *v += b;
            }
        }
        debug_assert_eq!(value.rows(), r);
        self.derived(Op::AddBias(x, bias), value, &[x, bias])
    }

    /// Concatenates nodes with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let rows = self.rows(parts[0]);
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                assert_eq!(self.rows(p), rows, "concat row mismatch");
                self.shape(p).1
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                let src = self.value(p).data();
                data.extend_from_slice(&src[r * w..(r + 1) * w]);
            }
        }
        self.derived(Op::Concat(parts.to_vec()), Tensor::new(rows, total, data), parts)
    }

    /// Column `j` of `a` as a B×1 node.
    pub fn col(&mut self, a: Var, j: usize) -> Var {
        let t = self.value(a);
        assert!(j < t.cols(), "column index out of range");
        let value = Tensor::column(t.col_vec(j));
        self.derived(Op::Col(a, j), value, &[a])
    }

    /// Sum of all entries, as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.derived(Op::Sum(a), value, &[a])
    }

    /// Gradient of the scalar node `output` with respect to every leaf.
    ///
    /// The tape is not modified, so repeated calls return identical results.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.shape(output) != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, node {} has shape {:?}",
                output.0,
                self.shape(output)
            )));
        }
        if !self.value(output).is_finite() {
            return Err(Error::NumericFault(format!("non-finite output at node {}", output.0)));
        }
        let n = output.0 + 1;
        let mut adj: Vec<Option<Tensor>> = vec![None; n];
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        adj[output.0] = Some(Tensor::scalar(1.0));

        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if !g.is_finite() {
                return Err(Error::NumericFault(format!("non-finite adjoint at node {i}")));
            }
            match &node.op {
                Op::Leaf => grads[i] = Some(g),
                Op::Const => {}
                Op::Add(a, b) => {
                    self.accum(&mut adj, *b, || g.clone());
                    self.accum(&mut adj, *a, || g);
                }
                Op::Sub(a, b) => {
                    self.accum(&mut adj, *b, || g.map(|x| -x));
                    self.accum(&mut adj, *a, || g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    self.accum(&mut adj, *a, || g.zip_map(vb, |x, y| x * y));
                    self.accum(&mut adj, *b, || g.zip_map(va, |x, y| x * y));
                }
                Op::Div(a, b) => {
                    let vb = self.value(*b);
                    let y = &node.value;
                    self.accum(&mut adj, *a, || g.zip_map(vb, |x, d| x / d));
                    self.accum(&mut adj, *b, || {
                        let gy = g.zip_map(y, |x, q| x * q);
                        gy.zip_map(vb, |x, d| -x / d)
                    });
                }
                Op::Affine(a, s) => {
                    let s = *s;
                    self.accum(&mut adj, *a, || g.map(|x| s * x));
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    self.accum(&mut adj, *a, || g.zip_map(y, |x, t| x * (1.0 - t * t)));
                }
                Op::Sin(a) => {
                    let va = self.value(*a);
                    self.accum(&mut adj, *a, || g.zip_map(va, |x, t| x * t.cos()));
                }
                Op::Cos(a) => {
                    let va = self.value(*a);
                    self.accum(&mut adj, *a, || g.zip_map(va, |x, t| -x * t.sin()));
                }
                Op::Sqrt(a) => {
                    let y = &node.value;
                    self.accum(&mut adj, *a, || g.zip_map(y, |x, s| 0.5 * x / s));
                }
                Op::MatMulNT(x, w) => {
                    let (b, k) = self.shape(*x);
                    let nout_rows = self.shape(*w).0;
                    let gv = g.data();
                    // dX = G·W   (B×out · out×in)
                    self.accum(&mut adj, *x, || {
                        let mut out = vec![0.0; b * k];
                        let wv = self.value(*w).data();
                        gemm(b, nout_rows, k, gv, nout_rows as isize, 1, wv, k as isize, 1, &mut out, 0.0);
                        Tensor::new(b, k, out)
                    });
                    // dW = Gᵀ·X  (out×B · B×in)
                    self.accum(&mut adj, *w, || {
                        let mut out = vec![0.0; nout_rows * k];
                        let xv = self.value(*x).data();
                        gemm(nout_rows, b, k, gv, 1, nout_rows as isize, xv, k as isize, 1, &mut out, 0.0);
                        Tensor::new(nout_rows, k, out)
                    });
                }
                Op::AddBias(x, bias) => {
                    let c = g.cols();
                    self.accum(&mut adj, *bias, || {
                        let mut s = vec![0.0; c];
                        for row in g.data().chunks(c.max(1)) {
                            for (acc, v) in s.iter_mut().zip(row) {
                                *acc += v;
                            }
                        }
                        Tensor::row(s)
                    });
                    self.accum(&mut adj, *x, || g);
                }
                Op::Concat(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        if self.nodes[p.0].needs_grad {
                            let mut data = Vec::with_capacity(rows * w);
                            for r in 0..rows {
                                data.extend_from_slice(&g.data()[r * total + offset..r * total + offset + w]);
                            }
                            let piece = Tensor::new(rows, w, data);
                            self.accum(&mut adj, p, || piece);
                        }
                        offset += w;
                    }
                }
                Op::Col(a, j) => {
                    let j = *j;
                    if self.nodes[a.0].needs_grad {
                        let (r, c) = self.shape(*a);
                        let slot = adj[a.0].get_or_insert_with(|| Tensor::zeros(r, c));
                        for row in 0..r {
                            let v = slot.get(row, j) + g.get(row, 0);
                            slot.set(row, j, v);
                        }
                    }
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    let s = g.item();
                    self.accum(&mut adj, *a, || Tensor::filled(r, c, s));
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn accum(&self, adj: &mut [Option<Tensor>], target: Var, contrib: impl FnOnce() -> Tensor) {
        if !self.nodes[target.0].needs_grad {
            return;
        }
        let t = contrib();
        match &mut adj[target.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let mut t = Tape::new();
        let x = t.scalar_leaf(3.0);
        let y = t.mul(x, x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item(), 6.0);
    }

    #[test]
    fn product_rule() {
        let mut t = Tape::new();
        let x = t.scalar_leaf(2.0);
        let y = t.scalar_leaf(5.0);
        let z = t.mul(x, y);
        let g = t.backward(z).unwrap();
        assert_eq!(g.get(x).unwrap().item(), 5.0);
        assert_eq!(g.get(y).unwrap().item(), 2.0);
    }

    #[test]
    fn tanh_slope_at_zero() {
        let mut t = Tape::new();
        let x = t.scalar_leaf(0.0);
        let y = t.tanh(x);
        assert_eq!(t.backward(y).unwrap().get(x).unwrap().item(), 1.0);
    }

    #[test]
    fn backward_is_repeatable() {
        let mut t = Tape::new();
        let x = t.scalar_leaf(0.7);
        let s = t.sin(x);
        let c = t.cos(x);
        let y = t.div(s, c);
        let a = t.backward(y).unwrap().get(x).unwrap().item();
        let b = t.backward(y).unwrap().get(x).unwrap().item();
        assert_eq!(a, b);
        assert!((a - 1.0 / 0.7f64.cos().powi(2)).abs() < 1e-14);
        assert!((t.value(y).item() - 0.7f64.tan()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_reports_node() {
        let mut t = Tape::new();
        let x = t.scalar_leaf(0.0);
        let y = t.sqrt(x);
        let err = t.backward(y).unwrap_err();
        assert!(matches!(err, Error::NumericFault(m) if m.contains("node 0")));
    }

    #[test]
    fn vector_output_is_a_contract_error() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::column(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let x = t.scalar_leaf(2.0);
        let c = t.constant(Tensor::scalar(4.0));
        let y = t.mul(x, c);
        let g = t.backward(y).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap().item(), 4.0);
    }

    #[test]
    fn matmul_gradients_match_hand_computation() {
        // y = sum(x·wᵀ + b), x: 2×3, w: 2×3
        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]));
        let w = t.leaf(Tensor::from_rows(&[vec![1.0, 0.0, -1.0], vec![0.5, 0.5, 0.5]]));
        let b = t.leaf(Tensor::row(vec![0.1, -0.2]));
        let z = t.matmul_nt(x, w);
        assert_eq!(t.value(z).to_rows(), vec![vec![-2.0, 3.0], vec![-2.0, 7.5]]);
        let zb = t.add_bias(z, b);
        let y = t.sum(zb);
        let g = t.backward(y).unwrap();
        // dW[o][i] = Σ_b x[b][i]
        assert_eq!(g.get(w).unwrap().to_rows(), vec![vec![5.0, 7.0, 9.0], vec![5.0, 7.0, 9.0]]);
        // dX[b][i] = Σ_o w[o][i]
        assert_eq!(g.get(x).unwrap().to_rows(), vec![vec![1.5, 0.5, -0.5]; 2]);
        assert_eq!(g.get(b).unwrap().to_rows(), vec![vec![2.0, 2.0]]);
    }

    #[test]
    fn concat_and_col_route_gradients() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::column(vec![1.0, 2.0]));
        let b = t.leaf(Tensor::column(vec![3.0, 4.0]));
        let ab = t.concat_cols(&[a, b]);
        let c1 = t.col(ab, 1);
        let sq = t.mul(c1, c1);
        let y = t.sum(sq);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[0.0, 0.0]);
        assert_eq!(g.get(b).unwrap().data(), &[6.0, 8.0]);
    }
}
