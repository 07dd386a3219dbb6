//! A hand-built PAL model for planted synthetic data.
//!
//! `P⁰` holds the planted signatures, refinement is plain pooling, `f_rd` is
//! the identity and `g` places `strength · w_i` in attribute `i`'s block. On
//! noiseless data the pooled prototype of an active attribute converges to
//! its planted region feature, so `fᴷ` lands next to `g(a_y)`.

use crate::dataset::GzslDataset;
use crate::error::{Error, Result};
use crate::model::{Dims, DppnModel, Hyperparams, Variant};
use crate::nn::Dense;
use crate::pal::{Aggregation, PalParams, SemanticProjector};
use crate::tensor::Tensor;

/// Oracle for signatures `w (N_a×C)` planted at `strength`, run for `k`
/// iterations.
pub fn oracle_model(
    signatures: &Tensor,
    strength: f64,
    k: usize,
    n_seen: usize,
) -> Result<DppnModel> {
    let (n_a, c) = signatures.dims2()?;
    if !(strength > 0.0 && strength.is_finite()) {
        return Err(Error::Config(format!(
            "oracle strength must be positive, got {strength}"
        )));
    }
    let hyper = Hyperparams {
        k,
        d: c,
        variant: Variant::Pal,
        aggregation: Aggregation::Cat,
        refine: false,
        train_projection: false,
        ..Hyperparams::default()
    };
    hyper.validate()?;

    let p0 = signatures.transpose();
    let mut proj = Tensor::zeros(&[c * n_a, n_a]);
    for i in 0..n_a {
        for (r, &v) in signatures.row(i).iter().enumerate() {
            proj.set(i * c + r, i, strength * v);
        }
    }
    Ok(DppnModel {
        hyper,
        dims: Dims {
            c,
            n_a,
            n_c: n_seen,
        },
        pal: Some(PalParams {
            p0,
            refine: None,
            reduce: Dense {
                w: Tensor::identity(c),
                b: Tensor::zeros(&[c, 1]),
            },
            aggregation: Aggregation::Cat,
            skip: false,
        }),
        baseline: None,
        pcc: None,
        proj: Some(SemanticProjector {
            layer: Dense {
                w: proj,
                b: Tensor::zeros(&[c * n_a, 1]),
            },
        }),
    })
}

/// Oracle for a synthetic dataset that carries its signatures.
pub fn oracle_for(dataset: &GzslDataset, strength: f64, k: usize) -> Result<DppnModel> {
    let sig = dataset
        .signatures
        .as_ref()
        .ok_or_else(|| Error::Dataset("dataset has no planted signatures".into()))?;
    if sig.cols() != dataset.channels() {
        return Err(Error::Dataset(format!(
            "signatures have C = {}, features have C = {}",
            sig.cols(),
            dataset.channels()
        )));
    }
    oracle_model(sig, strength, k, dataset.n_seen())
}
