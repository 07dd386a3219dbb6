#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dppn::dataset::GzslDataset;
use dppn::model::{Dims, DppnModel, Hyperparams, Variant};
use dppn::synth::{generate_synthetic, SyntheticConfig};
use dppn::tensor::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(shape: &[usize], seed: u64) -> Tensor {
    Tensor::randn(shape, 1.0, &mut rng(seed))
}

/// Plain-loop matrix product, independent of the engine.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let n = b.cols();
    assert_eq!(k, b.rows());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[i * n + j] = (0..k).map(|t| a.at(i, t) * b.at(t, j)).sum();
        }
    }
    Tensor::matrix(m, n, out).unwrap()
}

/// Column softmax without max subtraction; fine for the small logits used here.
pub fn softmax_cols(a: &Tensor) -> Tensor {
    let (m, n) = (a.rows(), a.cols());
    let mut out = a.clone();
    for j in 0..n {
        let z: f64 = (0..m).map(|i| a.at(i, j).exp()).sum();
        for i in 0..m {
            out.set(i, j, a.at(i, j).exp() / z);
        }
    }
    out
}

/// `W x + b` on every column of `x`.
pub fn dense(w: &Tensor, b: &Tensor, x: &Tensor) -> Tensor {
    let mut y = matmul(w, x);
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            y.set(i, j, y.at(i, j) + b.data()[i]);
        }
    }
    y
}

pub fn relu(t: &Tensor) -> Tensor {
    t.map(|v| v.max(0.0))
}

pub fn sigmoid(t: &Tensor) -> Tensor {
    t.map(|v| 1.0 / (1.0 + (-v).exp()))
}

/// `−log softmax(logits)[y]` by direct evaluation.
pub fn cross_entropy(logits: &[f64], y: usize) -> f64 {
    let z: f64 = logits.iter().map(|v| v.exp()).sum();
    z.ln() - logits[y]
}

pub fn sq_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The tiny end-to-end instance: C=6, N=4, N_a=3, N_c=2.
pub fn tiny_dims() -> Dims {
    Dims {
        c: 6,
        n_a: 3,
        n_c: 2,
    }
}

pub fn tiny_seen_attributes() -> Tensor {
    Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]).unwrap()
}

pub fn tiny_model(hyper: Hyperparams) -> DppnModel {
    DppnModel::init(hyper, tiny_dims(), &tiny_seen_attributes()).unwrap()
}

pub fn tiny_hyper(variant: Variant, k: usize) -> Hyperparams {
    Hyperparams {
        k,
        d: 2,
        variant,
        seed: 11,
        ..Hyperparams::default()
    }
}

/// Shrunk reference data for fast training tests.
pub fn small_dataset(seed: u64) -> GzslDataset {
    let mut cfg = SyntheticConfig::reference();
    cfg.samples_per_class = 10;
    cfg.seed = seed;
    generate_synthetic(&cfg).unwrap()
}

pub fn reference_dataset() -> GzslDataset {
    generate_synthetic(&SyntheticConfig::reference()).unwrap()
}
