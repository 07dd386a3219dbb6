//! Dense layers and parameter binding.

use std::collections::BTreeMap;

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Fully-connected layer `y = W x + b`, applied to every column of `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    /// Gaussian weights with std `1/√in`, zero bias.
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w: Tensor::randn(&[output, input], 1.0 / (input as f64).sqrt(), rng),
            b: Tensor::zeros(&[output, 1]),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Tensor::zeros(&[output, input]),
            b: Tensor::zeros(&[output, 1]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn bind(&self, binder: &mut Binder<'_>, prefix: &str) -> DenseVars {
        DenseVars {
            w: binder.bind(format!("{prefix}.w"), &self.w),
            b: binder.bind(format!("{prefix}.b"), &self.b),
        }
    }

    pub(crate) fn push_named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.w"), &self.w));
        out.push((format!("{prefix}.b"), &self.b));
    }

    pub(crate) fn push_named_mut<'a>(
        &'a mut self,
        prefix: &str,
        out: &mut Vec<(String, &'a mut Tensor)>,
    ) {
        out.push((format!("{prefix}.w"), &mut self.w));
        out.push((format!("{prefix}.b"), &mut self.b));
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DenseVars {
    pub w: Var,
    pub b: Var,
}

impl DenseVars {
    pub fn apply(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let y = g.matmul(self.w, x)?;
        g.add_col(y, self.b)
    }
}

/// Places named parameter tensors on a graph and remembers which [`Var`]
/// each name became, so gradients can be routed back by name.
pub struct Binder<'g> {
    graph: &'g mut Graph,
    frozen: Vec<String>,
    bound: BTreeMap<String, Var>,
}

impl<'g> Binder<'g> {
    pub fn new(graph: &'g mut Graph) -> Self {
        Self {
            graph,
            frozen: Vec::new(),
            bound: BTreeMap::new(),
        }
    }

    /// Names listed here are bound as constants.
    pub fn with_frozen(mut self, names: &[&str]) -> Self {
        self.frozen = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn bind(&mut self, name: String, value: &Tensor) -> Var {
        let v = if self.frozen.contains(&name) {
            self.graph.constant(value.clone())
        } else {
            self.graph.param(value.clone())
        };
        self.bound.insert(name, v);
        v
    }

    pub fn graph(&mut self) -> &mut Graph {
        self.graph
    }

    pub fn finish(self) -> BTreeMap<String, Var> {
        self.bound
    }
}
