//! Reverse-mode automatic differentiation over rank-2 tensors.
//!
//! A [`Graph`] is an append-only tape. Every operation pushes a node holding
//! its output value and the [`Op`] it came from; parents always precede
//! children, so walking the tape backwards is a reverse topological order and
//! each node is visited exactly once.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise operations. Binary kinds require equal shapes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elementwise {
    Relu,
    Sigmoid,
    Add,
    Mul,
    Scale(f64),
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    SoftmaxCols(Var),
    ConcatCols(Vec<Var>),
    Column(Var, usize),
    Relu(Var),
    Sigmoid(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddCol(Var, Var),
    MulCol(Var, Var),
    MeanCols(Var),
    SumCols(Var),
    MaxCols(Var, Vec<usize>),
    SqL2(Var, Var),
    CrossEntropy(Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros if `v` did not
    /// influence the loss.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    t.dims2().map_err(|_| Error::Dimension {
        op,
        msg: format!("expected a matrix, got shape {:?}", t.shape()),
    })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(
        &mut self,
        op_name: &'static str,
        value: Tensor,
        op: Op,
        parents: &[Var],
    ) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Trainable leaf; receives a gradient on `backward`.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Non-trainable leaf (inputs, labels, frozen weights).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        assert!(value.is_finite(), "leaf tensors must be finite");
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (_, k) = require_matrix("matmul", ta)?;
        let (k2, _) = require_matrix("matmul", tb)?;
        if k != k2 {
            return Err(shape_err("matmul", ta, tb));
        }
        let out = Tensor::matmul_raw(ta, tb);
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        require_matrix("transpose", ta)?;
        let out = ta.transpose();
        self.push("transpose", out, Op::Transpose(a), &[a])
    }

    /// Softmax down each column, stabilized by subtracting the column max.
    pub fn softmax_cols(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let (m, n) = require_matrix("softmax_cols", ta)?;
        let mut out = ta.clone();
        let d = out.data_mut();
        for j in 0..n {
            let max = (0..m)
                .map(|i| d[i * n + j])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for i in 0..m {
                let e = (d[i * n + j] - max).exp();
                d[i * n + j] = e;
                sum += e;
            }
            for i in 0..m {
                d[i * n + j] /= sum;
            }
        }
        self.push("softmax_cols", out, Op::SoftmaxCols(a), &[a])
    }

    /// Stacks `d×1` column vectors into one `(d·len)×1` vector, in list order.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(Error::Dimension {
            op: "concat_cols",
            msg: "empty list".into(),
        })?;
        let d = self.value(*first).rows();
        let mut data = Vec::with_capacity(d * parts.len());
        for &p in parts {
            let t = self.value(p);
            if t.shape() != [d, 1] {
                return Err(Error::Dimension {
                    op: "concat_cols",
                    msg: format!("part shape {:?}, expected [{d}, 1]", t.shape()),
                });
            }
            data.extend_from_slice(t.data());
        }
        let out = Tensor::column_vector(data)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Column `j` of a matrix as an `m×1` vector.
    pub fn column(&mut self, a: Var, j: usize) -> Result<Var> {
        let ta = self.value(a);
        let (_, n) = require_matrix("column", ta)?;
        if j >= n {
            return Err(Error::Index {
                what: "column",
                index: j,
                len: n,
            });
        }
        let out = Tensor::column_vector(ta.column(j))?;
        self.push("column", out, Op::Column(a, j), &[a])
    }

    pub fn elementwise(&mut self, kind: Elementwise, a: Var, b: Option<Var>) -> Result<Var> {
        match (kind, b) {
            (Elementwise::Relu, None) => self.relu(a),
            (Elementwise::Sigmoid, None) => self.sigmoid(a),
            (Elementwise::Scale(s), None) => self.scale(a, s),
            (Elementwise::Add, Some(b)) => self.add(a, b),
            (Elementwise::Mul, Some(b)) => self.mul(a, b),
            (kind, _) => Err(Error::Dimension {
                op: "elementwise",
                msg: format!("wrong operand count for {kind:?}"),
            }),
        }
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push("relu", out, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a), &[a])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v * s);
        self.push("scale", out, Op::Scale(a, s), &[a])
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta, tb));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("add", a, b, |x, y| x + y)?;
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("mul", a, b, |x, y| x * y)?;
        self.push("mul", out, Op::Mul(a, b), &[a, b])
    }

    /// Sum of a non-empty list of equally shaped nodes.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let (&first, rest) = terms.split_first().ok_or(Error::Dimension {
            op: "sum",
            msg: "empty list".into(),
        })?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// `a[m×n] + b[m×1]`, `b` broadcast across columns.
    pub fn add_col(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_col("add_col", a, b, |x, y| x + y)?;
        self.push("add_col", out, Op::AddCol(a, b), &[a, b])
    }

    /// `a[m×n] ⊙ g[m×1]`, `g` broadcast across columns.
    pub fn mul_col(&mut self, a: Var, g: Var) -> Result<Var> {
        let out = self.broadcast_col("mul_col", a, g, |x, y| x * y)?;
        self.push("mul_col", out, Op::MulCol(a, g), &[a, g])
    }

    fn broadcast_col(
        &self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, n) = require_matrix(name, ta)?;
        if tb.shape() != [m, 1] {
            return Err(shape_err(name, ta, tb));
        }
        let mut out = ta.clone();
        let d = out.data_mut();
        for i in 0..m {
            let bv = tb.data()[i];
            for v in &mut d[i * n..(i + 1) * n] {
                *v = f(*v, bv);
            }
        }
        Ok(out)
    }

    pub fn mean_cols(&mut self, a: Var) -> Result<Var> {
        let out = self.reduce_cols("mean_cols", a, |row| {
            row.iter().sum::<f64>() / row.len() as f64
        })?;
        self.push("mean_cols", out, Op::MeanCols(a), &[a])
    }

    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let out = self.reduce_cols("sum_cols", a, |row| row.iter().sum())?;
        self.push("sum_cols", out, Op::SumCols(a), &[a])
    }

    /// Row-wise max across columns; the gradient goes to the first maximal
    /// entry of each row.
    pub fn max_cols(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let (m, n) = require_matrix("max_cols", ta)?;
        let mut arg = Vec::with_capacity(m);
        let mut data = Vec::with_capacity(m);
        for i in 0..m {
            let row = &ta.data()[i * n..(i + 1) * n];
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            arg.push(best);
            data.push(row[best]);
        }
        let out = Tensor::column_vector(data)?;
        self.push("max_cols", out, Op::MaxCols(a, arg), &[a])
    }

    fn reduce_cols(&self, name: &'static str, a: Var, f: impl Fn(&[f64]) -> f64) -> Result<Tensor> {
        let ta = self.value(a);
        let (m, n) = require_matrix(name, ta)?;
        Tensor::column_vector((0..m).map(|i| f(&ta.data()[i * n..(i + 1) * n])).collect())
    }

    /// Squared Euclidean distance `Σ(a−b)²` as a `1×1` tensor.
    pub fn sq_l2(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("sq_l2", ta, tb));
        }
        let d: f64 = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.push("sq_l2", Tensor::scalar(d), Op::SqL2(a, b), &[a, b])
    }

    /// `−log softmax(logits)[target]` for an `n×1` logit vector.
    pub fn cross_entropy_logits(&mut self, logits: Var, target: usize) -> Result<Var> {
        let t = self.value(logits);
        let (n, c) = require_matrix("cross_entropy_logits", t)?;
        if c != 1 {
            return Err(Error::Dimension {
                op: "cross_entropy_logits",
                msg: format!("logits must be n×1, got {:?}", t.shape()),
            });
        }
        if target >= n {
            return Err(Error::Index {
                what: "target class",
                index: target,
                len: n,
            });
        }
        let loss = log_sum_exp(t.data()) - t.data()[target];
        self.push(
            "cross_entropy_logits",
            Tensor::scalar(loss),
            Op::CrossEntropy(logits, target),
            &[logits],
        )
    }

    /// Accumulates `d loss / d v` for every node that depends on a trainable
    /// leaf. A node used by several consumers receives the sum of their
    /// contributions.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Dimension {
                op: "backward",
                msg: format!("loss must be scalar, got shape {:?}", lv.shape()),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: self
                .nodes
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
        })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let out = &node.value;
        let mut send = |v: Var, contrib: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&contrib),
                slot => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].requires_grad {
                    send(*a, Tensor::matmul_raw(g, &tb.transpose()));
                }
                if self.nodes[b.0].requires_grad {
                    send(*b, Tensor::matmul_raw(&ta.transpose(), g));
                }
            }
            Op::Transpose(a) => send(*a, g.transpose()),
            Op::SoftmaxCols(a) => {
                // dx_ij = s_ij (g_ij − Σ_k g_kj s_kj)
                let (m, n) = (out.rows(), out.cols());
                let (s, gd) = (out.data(), g.data());
                let mut dx = vec![0.0; m * n];
                for j in 0..n {
                    let dot: f64 = (0..m).map(|i| s[i * n + j] * gd[i * n + j]).sum();
                    for i in 0..m {
                        dx[i * n + j] = s[i * n + j] * (gd[i * n + j] - dot);
                    }
                }
                send(*a, Tensor::new(out.shape().to_vec(), dx).expect("shape"));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let d = self.value(p).rows();
                    let slice = g.data()[offset..offset + d].to_vec();
                    send(p, Tensor::column_vector(slice).expect("shape"));
                    offset += d;
                }
            }
            Op::Column(a, j) => {
                let ta = self.value(*a);
                let mut dx = Tensor::zeros(ta.shape());
                for (r, &gv) in g.data().iter().enumerate() {
                    dx.set(r, *j, gv);
                }
                send(*a, dx);
            }
            Op::Relu(a) => {
                let ta = self.value(*a);
                let dx = ta
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&x, &gv)| if x > 0.0 { gv } else { 0.0 })
                    .collect();
                send(*a, Tensor::new(ta.shape().to_vec(), dx).expect("shape"));
            }
            Op::Sigmoid(a) => {
                let dx = out
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&s, &gv)| gv * s * (1.0 - s))
                    .collect();
                send(*a, Tensor::new(out.shape().to_vec(), dx).expect("shape"));
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let prod = |x: &Tensor| {
                    let d = x
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&u, &v)| u * v)
                        .collect();
                    Tensor::new(x.shape().to_vec(), d).expect("shape")
                };
                send(*a, prod(tb));
                send(*b, prod(ta));
            }
            Op::Scale(a, s) => send(*a, g.map(|v| v * s)),
            Op::AddCol(a, b) => {
                send(*a, g.clone());
                send(*b, row_sums(g));
            }
            Op::MulCol(a, gate) => {
                let (ta, tg) = (self.value(*a), self.value(*gate));
                let (m, n) = (ta.rows(), ta.cols());
                let mut da = g.clone();
                let mut dg = vec![0.0; m];
                for (i, dgi) in dg.iter_mut().enumerate() {
                    let gi = tg.data()[i];
                    for j in 0..n {
                        let k = i * n + j;
                        *dgi += g.data()[k] * ta.data()[k];
                        da.data_mut()[k] *= gi;
                    }
                }
                send(*a, da);
                send(*gate, Tensor::column_vector(dg).expect("shape"));
            }
            Op::MeanCols(a) => {
                let n = self.value(*a).cols();
                send(*a, broadcast_cols(g, n, 1.0 / n as f64));
            }
            Op::SumCols(a) => {
                let n = self.value(*a).cols();
                send(*a, broadcast_cols(g, n, 1.0));
            }
            Op::MaxCols(a, arg) => {
                let mut dx = Tensor::zeros(self.value(*a).shape());
                for (i, &j) in arg.iter().enumerate() {
                    dx.set(i, j, g.data()[i]);
                }
                send(*a, dx);
            }
            Op::SqL2(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let s = 2.0 * g.item();
                let da: Vec<f64> = ta
                    .data()
                    .iter()
                    .zip(tb.data())
                    .map(|(x, y)| s * (x - y))
                    .collect();
                let db = da.iter().map(|v| -v).collect();
                send(*a, Tensor::new(ta.shape().to_vec(), da).expect("shape"));
                send(*b, Tensor::new(tb.shape().to_vec(), db).expect("shape"));
            }
            Op::CrossEntropy(logits, target) => {
                let t = self.value(*logits);
                let lse = log_sum_exp(t.data());
                let gv = g.item();
                let mut d: Vec<f64> = t.data().iter().map(|&z| gv * (z - lse).exp()).collect();
                d[*target] -= gv;
                send(*logits, Tensor::column_vector(d).expect("shape"));
            }
        }
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

fn row_sums(g: &Tensor) -> Tensor {
    let n = g.cols();
    Tensor::column_vector(g.data().chunks(n).map(|r| r.iter().sum()).collect()).expect("shape")
}

fn broadcast_cols(g: &Tensor, n: usize, s: f64) -> Tensor {
    let data = g
        .data()
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v * s, n))
        .collect();
    Tensor::matrix(g.rows(), n, data).expect("shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let mut g = Graph::new();
        let i2 = g.constant(Tensor::identity(2));
        let a = g.constant(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let b = g.constant(m(&[&[5.0, 6.0], &[7.0, 8.0]]));
        let z = g.constant(Tensor::zeros(&[2, 3]));
        let ia = g.matmul(i2, a).unwrap();
        assert_eq!(g.value(ia), g.value(a));
        let ab = g.matmul(a, b).unwrap();
        assert_eq!(g.value(ab).data(), &[19.0, 22.0, 43.0, 50.0]);
        let az = g.matmul(a, z).unwrap();
        assert!(g.value(az).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn softmax_examples() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::zeros(&[4, 2]));
        let s = g.softmax_cols(z).unwrap();
        assert!(g.value(s).data().iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let x = g.constant(m(&[&[7.5], &[7.5]]));
        let s = g.softmax_cols(x).unwrap();
        assert_eq!(g.value(s).data(), &[0.5, 0.5]);

        let x = g.constant(m(&[&[0.0], &[3f64.ln()]]));
        let s = g.softmax_cols(x).unwrap();
        assert!((g.value(s).data()[0] - 0.25).abs() < 1e-12);
        assert!((g.value(s).data()[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let mut g = Graph::new();
        let x = g.constant(m(&[&[1e6], &[0.0]]));
        let s = g.softmax_cols(x).unwrap();
        assert_eq!(g.value(s).data(), &[1.0, 0.0]);
    }

    #[test]
    fn concat_examples_and_errors() {
        let mut g = Graph::new();
        let a = g.constant(m(&[&[1.0], &[2.0]]));
        let b = g.constant(m(&[&[3.0], &[4.0]]));
        let c = g.concat_cols(&[a, b]).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 3.0, 4.0]);
        let single = g.concat_cols(&[a]).unwrap();
        assert_eq!(g.value(single), g.value(a));
        assert!(g.concat_cols(&[]).is_err());
        let ragged = g.constant(m(&[&[1.0]]));
        assert!(g.concat_cols(&[a, ragged]).is_err());

        let parts: Vec<Var> = (0..312)
            .map(|_| g.constant(Tensor::zeros(&[8, 1])))
            .collect();
        let big = g.concat_cols(&parts).unwrap();
        assert_eq!(g.value(big).shape(), &[2496, 1]);
    }

    #[test]
    fn elementwise_examples() {
        let mut g = Graph::new();
        let x = g.constant(m(&[&[-1.0, 0.0, 2.0]]));
        let r = g.elementwise(Elementwise::Relu, x, None).unwrap();
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = g.constant(Tensor::scalar(0.0));
        let s = g.elementwise(Elementwise::Sigmoid, z, None).unwrap();
        assert_eq!(g.value(s).item(), 0.5);
        let ones = g.constant(Tensor::filled(&[1, 3], 1.0));
        let p = g.elementwise(Elementwise::Mul, x, Some(ones)).unwrap();
        assert_eq!(g.value(p), g.value(x));
        let bad = g.constant(Tensor::zeros(&[3, 1]));
        assert!(g.elementwise(Elementwise::Add, x, Some(bad)).is_err());
        assert!(g.elementwise(Elementwise::Add, x, None).is_err());
    }

    #[test]
    fn relu_gradient_at_zero_is_zero() {
        let mut g = Graph::new();
        let w = g.param(m(&[&[0.0, 1.0]]));
        let r = g.relu(w).unwrap();
        let s = g.sum_cols(r).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(w).data(), &[0.0, 1.0]);
    }

    #[test]
    fn sq_l2_examples() {
        let mut g = Graph::new();
        let a = g.constant(m(&[&[0.0, 0.0]]));
        let b = g.constant(m(&[&[3.0, 4.0]]));
        let d = g.sq_l2(a, b).unwrap();
        assert_eq!(g.value(d).item(), 25.0);
        let d0 = g.sq_l2(b, b).unwrap();
        assert_eq!(g.value(d0).item(), 0.0);
        let c = g.constant(Tensor::zeros(&[2, 1]));
        assert!(g.sq_l2(a, c).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let mut g = Graph::new();
        let u = g.constant(Tensor::filled(&[5, 1], 0.3));
        let l = g.cross_entropy_logits(u, 2).unwrap();
        assert!((g.value(l).item() - 5f64.ln()).abs() < 1e-12);

        let big = g.constant(Tensor::column_vector(vec![0.0, 1e6, 0.0]).unwrap());
        let l = g.cross_entropy_logits(big, 1).unwrap();
        assert!(g.value(l).item().abs() < 1e-12);

        // −log(e³ / (e + e² + e³)) = log(1 + e⁻¹ + e⁻²)
        let z = g.constant(Tensor::column_vector(vec![1.0, 2.0, 3.0]).unwrap());
        let l = g.cross_entropy_logits(z, 2).unwrap();
        let expected = (1.0 + (-1f64).exp() + (-2f64).exp()).ln();
        assert!((g.value(l).item() - expected).abs() < 1e-12);
        assert!((g.value(l).item() - 0.4076).abs() < 5e-5);

        assert!(g.cross_entropy_logits(z, 3).is_err());
    }

    #[test]
    fn backward_examples() {
        let mut g = Graph::new();
        let w = g.param(Tensor::column_vector(vec![3.0]).unwrap());
        let unused = g.param(Tensor::column_vector(vec![1.0, 2.0]).unwrap());
        let zero = g.constant(Tensor::zeros(&[1, 1]));
        let loss = g.sq_l2(w, zero).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(w).data(), &[6.0]);
        assert_eq!(grads.get(unused).data(), &[0.0, 0.0]);

        let v = g.param(Tensor::zeros(&[2, 1]));
        assert!(g.backward(v).is_err());
    }

    #[test]
    fn shared_parameter_accumulates_both_paths() {
        // loss = sum(2w) + sum(w ⊙ w) → grad = 2 + 2w
        let mut g = Graph::new();
        let w = g.param(m(&[&[1.0], &[-2.0]]));
        let a = g.scale(w, 2.0).unwrap();
        let b = g.mul(w, w).unwrap();
        let s = g.add(a, b).unwrap();
        let t = g.transpose(s).unwrap();
        let loss = g.sum_cols(t).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(w).data(), &[4.0, -2.0]);
    }

    #[test]
    fn non_finite_results_are_rejected() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(1e300));
        let err = g.mul(x, x).unwrap_err();
        assert!(matches!(err, Error::NonFinite { op: "mul" }));
    }
}
