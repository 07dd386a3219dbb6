//! Progressive attribute localization.
//!
//! Starting from shared attribute prototypes `P⁰ (C×N_a)`, each iteration
//! soft-assigns image regions to prototypes with a column softmax over
//! `XᵀPᵏ`, pools the regions with those weights and refines the pooled
//! features into image-specific prototypes `Pᵏ⁺¹`. Every iterate is reduced
//! per attribute and aggregated into a visual representation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{Binder, Dense, DenseVars};
use crate::tensor::Tensor;

/// How per-attribute reduced prototypes are combined into one vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// Concatenation in attribute order, extent `D·N_a`.
    #[default]
    Cat,
    /// Sum over attributes, extent `D`.
    Sum,
    /// Element-wise max over attributes, extent `D`.
    Max,
}

impl Aggregation {
    pub fn output_dim(self, d: usize, n_a: usize) -> usize {
        match self {
            Aggregation::Cat => d * n_a,
            Aggregation::Sum | Aggregation::Max => d,
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Cat => "cat",
            Aggregation::Sum => "sum",
            Aggregation::Max => "max",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cat" => Ok(Aggregation::Cat),
            "sum" => Ok(Aggregation::Sum),
            "max" => Ok(Aggregation::Max),
            _ => Err(Error::Config(format!("unknown aggregation {s:?}"))),
        }
    }
}

/// A `C×N` local feature grid on a graph, with its transpose cached.
#[derive(Clone, Copy, Debug)]
pub struct FeatureMap {
    pub x: Var,
    pub xt: Var,
}

impl FeatureMap {
    pub fn new(g: &mut Graph, features: &Tensor) -> Result<Self> {
        features.dims2()?;
        let x = g.constant(features.clone());
        let xt = g.constant(features.transpose());
        Ok(Self { x, xt })
    }
}

/// `Pᵏ`, one `C`-dim prototype per column. `k = 0` is the shared parameter.
#[derive(Clone, Copy, Debug)]
pub struct AttributePrototypeSet {
    pub matrix: Var,
    pub k: usize,
}

/// `S (N×N_a)`: column `i` distributes unit mass over regions for attribute `i`.
#[derive(Clone, Copy, Debug)]
pub struct SimilarityMatrix(pub Var);

/// `fᵏ(X)`, an `N_v×1` vector.
#[derive(Clone, Copy, Debug)]
pub struct VisualRepresentation(pub Var);

#[derive(Clone, Debug, PartialEq)]
pub struct PalParams {
    /// `P⁰`, `C×N_a`.
    pub p0: Tensor,
    /// Two-layer refinement `C→C→C` with a relu in between; `None` passes
    /// pooled features through unchanged.
    pub refine: Option<(Dense, Dense)>,
    /// Per-attribute reduction `C→D`.
    pub reduce: Dense,
    pub aggregation: Aggregation,
    /// Refined prototypes are added to the previous set.
    pub skip: bool,
}

/// Initialization and wiring choices for [`PalParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PalConfig {
    pub d: usize,
    pub refine: bool,
    pub aggregation: Aggregation,
    /// Multiplier on the `1/√C` std of `P⁰`.
    pub p0_scale: f64,
    /// Start `f_rd` at zero.
    pub zero_reduce: bool,
    /// `Pᵏ⁺¹ = Pᵏ + f_ar(X·S)` instead of `f_ar(X·S)`.
    pub skip: bool,
}

impl PalConfig {
    pub fn new(d: usize, refine: bool, aggregation: Aggregation) -> Self {
        Self {
            d,
            refine,
            aggregation,
            p0_scale: 1.0,
            zero_reduce: false,
            skip: false,
        }
    }
}

impl PalParams {
    pub fn init<R: Rng + ?Sized>(c: usize, n_a: usize, cfg: PalConfig, rng: &mut R) -> Self {
        let p0 = Tensor::randn(&[c, n_a], cfg.p0_scale / (c as f64).sqrt(), rng);
        let refine = cfg
            .refine
            .then(|| (Dense::init(c, c, rng), Dense::init(c, c, rng)));
        // Drawn either way so later draws do not depend on the choice.
        let mut reduce = Dense::init(c, cfg.d, rng);
        if cfg.zero_reduce {
            reduce = Dense::zeros(c, cfg.d);
        }
        Self {
            p0,
            refine,
            reduce,
            aggregation: cfg.aggregation,
            skip: cfg.skip,
        }
    }

    pub fn channels(&self) -> usize {
        self.p0.rows()
    }

    pub fn n_attributes(&self) -> usize {
        self.p0.cols()
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduce.output_dim()
    }

    /// `N_v` of the representation this configuration produces.
    pub fn representation_dim(&self) -> usize {
        self.aggregation
            .output_dim(self.reduced_dim(), self.n_attributes())
    }

    pub fn bind(&self, binder: &mut Binder<'_>) -> PalVars {
        PalVars {
            p0: binder.bind("pal.p0".into(), &self.p0),
            refine: self.refine.as_ref().map(|(l1, l2)| {
                (
                    l1.bind(binder, "pal.refine1"),
                    l2.bind(binder, "pal.refine2"),
                )
            }),
            reduce: self.reduce.bind(binder, "pal.reduce"),
            aggregation: self.aggregation,
            skip: self.skip,
        }
    }

    pub(crate) fn push_named<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        out.push(("pal.p0".into(), &self.p0));
        if let Some((l1, l2)) = &self.refine {
            l1.push_named("pal.refine1", out);
            l2.push_named("pal.refine2", out);
        }
        self.reduce.push_named("pal.reduce", out);
    }

    pub(crate) fn push_named_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push(("pal.p0".into(), &mut self.p0));
        if let Some((l1, l2)) = &mut self.refine {
            l1.push_named_mut("pal.refine1", out);
            l2.push_named_mut("pal.refine2", out);
        }
        self.reduce.push_named_mut("pal.reduce", out);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PalVars {
    pub p0: Var,
    pub refine: Option<(DenseVars, DenseVars)>,
    pub reduce: DenseVars,
    pub aggregation: Aggregation,
    pub skip: bool,
}

impl PalVars {
    pub fn initial_prototypes(&self) -> AttributePrototypeSet {
        AttributePrototypeSet {
            matrix: self.p0,
            k: 0,
        }
    }
}

/// `g(·)`: attribute vector `N_a` → latent `N_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticProjector {
    pub layer: Dense,
}

/// Starting point of `g(·)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProjectionInit {
    /// Gaussian weights, zero bias.
    #[default]
    Random,
    /// Attribute `i` maps to a shared random `D`-vector in rows `iD..(i+1)D`
    /// and to zero elsewhere. Needs `N_v = D·N_a`.
    Block,
}

impl fmt::Display for ProjectionInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectionInit::Random => "random",
            ProjectionInit::Block => "block",
        })
    }
}

impl FromStr for ProjectionInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ProjectionInit::Random),
            "block" => Ok(ProjectionInit::Block),
            _ => Err(Error::Config(format!("unknown projection init {s:?}"))),
        }
    }
}

impl SemanticProjector {
    pub fn init<R: Rng + ?Sized>(
        n_a: usize,
        n_v: usize,
        init: ProjectionInit,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = Dense::init(n_a, n_v, rng);
        if init == ProjectionInit::Block {
            if n_a == 0 || !n_v.is_multiple_of(n_a) {
                return Err(Error::Config(format!(
                    "block projection needs N_v divisible by N_a, got N_v = {n_v}, N_a = {n_a}"
                )));
            }
            let d = n_v / n_a;
            let u = Tensor::randn(&[d, 1], 1.0, rng);
            layer.w = Tensor::zeros(&[n_v, n_a]);
            for i in 0..n_a {
                for (r, &v) in u.data().iter().enumerate() {
                    layer.w.set(i * d + r, i, v);
                }
            }
        }
        Ok(Self { layer })
    }

    pub fn output_dim(&self) -> usize {
        self.layer.output_dim()
    }

    pub fn bind(&self, binder: &mut Binder<'_>) -> SemanticProjectorVars {
        SemanticProjectorVars(self.layer.bind(binder, "proj"))
    }

    pub(crate) fn push_named<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        self.layer.push_named("proj", out);
    }

    pub(crate) fn push_named_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.layer.push_named_mut("proj", out);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SemanticProjectorVars(pub DenseVars);

impl SemanticProjectorVars {
    /// Projects one or more attribute column vectors.
    pub fn project(&self, g: &mut Graph, a: Var) -> Result<Var> {
        self.0.apply(g, a)
    }
}

/// `S = softmax_cols(Xᵀ P)`.
pub fn localize(
    g: &mut Graph,
    x: &FeatureMap,
    p: &AttributePrototypeSet,
) -> Result<SimilarityMatrix> {
    let (c_x, c_p) = (g.value(x.x).rows(), g.value(p.matrix).rows());
    if c_x != c_p {
        return Err(Error::Shape {
            op: "localize",
            lhs: g.value(x.x).shape().to_vec(),
            rhs: g.value(p.matrix).shape().to_vec(),
        });
    }
    let logits = g.matmul(x.xt, p.matrix)?;
    Ok(SimilarityMatrix(g.softmax_cols(logits)?))
}

/// One localize-then-refine step: `Pᵏ⁺¹ = f_ar(X · softmax_cols(XᵀPᵏ))`,
/// plus `Pᵏ` when the skip connection is on.
///
/// Returns the similarity matrix used for the step alongside the new set.
pub fn update_prototypes(
    g: &mut Graph,
    x: &FeatureMap,
    p: &AttributePrototypeSet,
    params: &PalVars,
) -> Result<(SimilarityMatrix, AttributePrototypeSet)> {
    let s = localize(g, x, p)?;
    let pooled = g.matmul(x.x, s.0)?;
    let mut refined = match &params.refine {
        Some((l1, l2)) => {
            let h = l1.apply(g, pooled)?;
            let h = g.relu(h)?;
            l2.apply(g, h)?
        }
        None => pooled,
    };
    if params.skip {
        refined = g.add(refined, p.matrix)?;
    }
    Ok((
        s,
        AttributePrototypeSet {
            matrix: refined,
            k: p.k + 1,
        },
    ))
}

/// Reduces each prototype column to `D` dims and aggregates.
pub fn assemble(
    g: &mut Graph,
    p: &AttributePrototypeSet,
    params: &PalVars,
) -> Result<VisualRepresentation> {
    if p.k == 0 {
        return Err(Error::Dimension {
            op: "assemble",
            msg: "representations are built from image-specific prototypes (k >= 1)".into(),
        });
    }
    let reduced = params.reduce.apply(g, p.matrix)?;
    let out = match params.aggregation {
        Aggregation::Cat => {
            let n_a = g.value(reduced).cols();
            let cols = (0..n_a)
                .map(|i| g.column(reduced, i))
                .collect::<Result<Vec<_>>>()?;
            g.concat_cols(&cols)?
        }
        Aggregation::Sum => g.sum_cols(reduced)?,
        Aggregation::Max => g.max_cols(reduced)?,
    };
    Ok(VisualRepresentation(out))
}

/// Squared distance between a representation and the projected attributes
/// of its class. Batch averaging is left to the caller.
pub fn semantic_align_loss(
    g: &mut Graph,
    f: &VisualRepresentation,
    attributes: Var,
    proj: &SemanticProjectorVars,
) -> Result<Var> {
    let in_dim = g.value(proj.0.w).cols();
    let a_shape = g.value(attributes).shape().to_vec();
    if a_shape != [in_dim, 1] {
        return Err(Error::Dimension {
            op: "semantic_align_loss",
            msg: format!(
                "attribute vector has shape {a_shape:?}, projector expects N_a = {in_dim}"
            ),
        });
    }
    let target = proj.project(g, attributes)?;
    g.sq_l2(f.0, target)
}

/// One iteration of the progressive loop.
#[derive(Clone, Copy, Debug)]
pub struct PalStep {
    pub similarity: SimilarityMatrix,
    pub prototypes: AttributePrototypeSet,
    pub representation: VisualRepresentation,
}

/// Runs `k_iters` localize/refine iterations from `P⁰` and returns
/// `(Sᵏ, Pᵏ, fᵏ)` for `k = 1..=k_iters`. `Sᵏ` is the matrix that produced
/// `Pᵏ`, so `S¹` always comes from the shared prototypes.
pub fn pal_forward(
    g: &mut Graph,
    x: &FeatureMap,
    params: &PalVars,
    k_iters: usize,
) -> Result<Vec<PalStep>> {
    if k_iters < 1 {
        return Err(Error::Config(
            "PAL needs at least one iteration (K >= 1)".into(),
        ));
    }
    let mut p = params.initial_prototypes();
    let mut steps = Vec::with_capacity(k_iters);
    for _ in 0..k_iters {
        let (s, next) = update_prototypes(g, x, &p, params)?;
        let f = assemble(g, &next, params)?;
        steps.push(PalStep {
            similarity: s,
            prototypes: next,
            representation: f,
        });
        p = next;
    }
    Ok(steps)
}
