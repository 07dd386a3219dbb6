//! Progressive category classification.
//!
//! Category prototypes `Cᵏ (N_v×N_c)` are chained through a channel gate and
//! a per-step bias: `Cᵏ⁺¹ = γ(Cᵏ) ⊙ Cᵏ + Wᵏ`, where `γ` squeezes the prototypes
//! to their mean over categories and excites it through a bottleneck MLP with
//! a sigmoid. Loss `k` pairs the `k`-th representation with `Cᵏ`, `k = 1..=K`,
//! so a model with `K` iterations owns biases `W⁰..Wᴷ⁻¹`.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{Binder, Dense, DenseVars};
use crate::pal::VisualRepresentation;
use crate::tensor::Tensor;

/// Bottleneck width of the gate: `N_v / 16`, at least 4.
pub fn gate_hidden_dim(n_v: usize) -> usize {
    (n_v / 16).max(4)
}

#[derive(Clone, Copy, Debug)]
pub struct CategoryPrototypeSet {
    pub matrix: Var,
    transposed: Var,
    pub k: usize,
}

impl CategoryPrototypeSet {
    pub fn new(g: &mut Graph, matrix: Var, k: usize) -> Result<Self> {
        let transposed = g.transpose(matrix)?;
        Ok(Self {
            matrix,
            transposed,
            k,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PccParams {
    /// `C⁰`, `N_v×N_c`.
    pub c0: Tensor,
    /// Squeeze (`N_v→h`, relu) and excite (`h→N_v`, sigmoid) layers; `None`
    /// passes `Cᵏ` through ungated.
    pub gate: Option<(Dense, Dense)>,
    /// `Wᵏ` for `k = 0..K`, each `N_v×N_c`.
    pub biases: Vec<Tensor>,
}

impl PccParams {
    pub fn init<R: Rng + ?Sized>(
        n_v: usize,
        n_c: usize,
        k_iters: usize,
        use_gate: bool,
        rng: &mut R,
    ) -> Self {
        let c0 = Tensor::randn(&[n_v, n_c], 1.0 / (n_v as f64).sqrt(), rng);
        Self::with_initial(c0, k_iters, use_gate, rng)
    }

    /// Uses a given `C⁰` instead of a random one.
    pub fn with_initial<R: Rng + ?Sized>(
        c0: Tensor,
        k_iters: usize,
        use_gate: bool,
        rng: &mut R,
    ) -> Self {
        let (n_v, n_c) = (c0.rows(), c0.cols());
        let h = gate_hidden_dim(n_v);
        let gate = use_gate.then(|| (Dense::init(n_v, h, rng), Dense::init(h, n_v, rng)));
        Self {
            c0,
            gate,
            biases: (0..k_iters).map(|_| Tensor::zeros(&[n_v, n_c])).collect(),
        }
    }

    pub fn n_categories(&self) -> usize {
        self.c0.cols()
    }

    pub fn dim(&self) -> usize {
        self.c0.rows()
    }

    pub fn bind(&self, binder: &mut Binder<'_>) -> PccVars {
        PccVars {
            c0: binder.bind("pcc.c0".into(), &self.c0),
            gate: self
                .gate
                .as_ref()
                .map(|(l1, l2)| (l1.bind(binder, "pcc.gate1"), l2.bind(binder, "pcc.gate2"))),
            biases: self
                .biases
                .iter()
                .enumerate()
                .map(|(k, w)| binder.bind(format!("pcc.bias{k}"), w))
                .collect(),
        }
    }

    pub(crate) fn push_named<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        out.push(("pcc.c0".into(), &self.c0));
        if let Some((l1, l2)) = &self.gate {
            l1.push_named("pcc.gate1", out);
            l2.push_named("pcc.gate2", out);
        }
        for (k, w) in self.biases.iter().enumerate() {
            out.push((format!("pcc.bias{k}"), w));
        }
    }

    pub(crate) fn push_named_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push(("pcc.c0".into(), &mut self.c0));
        if let Some((l1, l2)) = &mut self.gate {
            l1.push_named_mut("pcc.gate1", out);
            l2.push_named_mut("pcc.gate2", out);
        }
        for (k, w) in self.biases.iter_mut().enumerate() {
            out.push((format!("pcc.bias{k}"), w));
        }
    }
}

#[derive(Clone, Debug)]
pub struct PccVars {
    pub c0: Var,
    pub gate: Option<(DenseVars, DenseVars)>,
    pub biases: Vec<Var>,
}

impl PccVars {
    pub fn iterations(&self) -> usize {
        self.biases.len()
    }
}

/// Channel gate `γ = sigmoid(W₂ relu(W₁ mean_j(c_j) + b₁) + b₂)`, `N_v×1`.
pub fn category_gate(
    g: &mut Graph,
    c: &CategoryPrototypeSet,
    gate: &(DenseVars, DenseVars),
) -> Result<Var> {
    let squeezed = g.mean_cols(c.matrix)?;
    let h = gate.0.apply(g, squeezed)?;
    let h = g.relu(h)?;
    let e = gate.1.apply(g, h)?;
    g.sigmoid(e)
}

/// `Cᵏ⁺¹ = γ ⊙ Cᵏ + Wᵏ` (or `Cᵏ + Wᵏ` without the gate).
pub fn update_category_prototypes(
    g: &mut Graph,
    c: &CategoryPrototypeSet,
    params: &PccVars,
    k: usize,
) -> Result<CategoryPrototypeSet> {
    let bias = *params.biases.get(k).ok_or(Error::Index {
        what: "category update step",
        index: k,
        len: params.biases.len(),
    })?;
    let carried = match &params.gate {
        Some(gate) => {
            let gamma = category_gate(g, c, gate)?;
            g.mul_col(c.matrix, gamma)?
        }
        None => c.matrix,
    };
    let next = g.add(carried, bias)?;
    CategoryPrototypeSet::new(g, next, c.k + 1)
}

/// `C¹..Cᴷ`, computed once and shared by every sample of a batch.
pub fn category_prototype_chain(
    g: &mut Graph,
    params: &PccVars,
) -> Result<Vec<CategoryPrototypeSet>> {
    let mut c = CategoryPrototypeSet::new(g, params.c0, 0)?;
    let mut chain = Vec::with_capacity(params.iterations());
    for k in 0..params.iterations() {
        c = update_category_prototypes(g, &c, params, k)?;
        chain.push(c);
    }
    Ok(chain)
}

/// Softmax cross-entropy of the logits `fᵀc_j` against label `y`.
pub fn category_loss(
    g: &mut Graph,
    f: &VisualRepresentation,
    c: &CategoryPrototypeSet,
    y: usize,
) -> Result<Var> {
    let n_c = g.value(c.matrix).cols();
    if y >= n_c {
        return Err(Error::Index {
            what: "seen-category label",
            index: y,
            len: n_c,
        });
    }
    let logits = g.matmul(c.transposed, f.0)?;
    g.cross_entropy_logits(logits, y)
}

/// Per-iteration category losses for one sample; `reps[k-1]` is scored
/// against `chain[k-1] = Cᵏ`.
pub fn pcc_losses(
    g: &mut Graph,
    reps: &[VisualRepresentation],
    chain: &[CategoryPrototypeSet],
    y: usize,
) -> Result<Vec<Var>> {
    if reps.len() != chain.len() {
        return Err(Error::Dimension {
            op: "pcc_forward",
            msg: format!(
                "{} representations for {} prototype sets",
                reps.len(),
                chain.len()
            ),
        });
    }
    reps.iter()
        .zip(chain)
        .map(|(f, c)| category_loss(g, f, c, y))
        .collect()
}

/// Builds the prototype chain and scores every representation.
pub fn pcc_forward(
    g: &mut Graph,
    reps: &[VisualRepresentation],
    params: &PccVars,
    y: usize,
) -> Result<Vec<Var>> {
    if reps.len() != params.iterations() {
        return Err(Error::Dimension {
            op: "pcc_forward",
            msg: format!(
                "{} representations for K = {}",
                reps.len(),
                params.iterations()
            ),
        });
    }
    let chain = category_prototype_chain(g, params)?;
    pcc_losses(g, reps, &chain, y)
}
