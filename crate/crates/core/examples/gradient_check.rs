//! Central-difference check of the full training objective on a tiny model.
//!
//! `cargo run --release --example gradient_check`

use dppn::gradcheck::{model_gradient_check, Example};
use dppn::model::{Dims, DppnModel, Hyperparams};
use dppn::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dppn::error::Result<()> {
    let hyper = Hyperparams {
        k: 2,
        d: 2,
        seed: 11,
        ..Hyperparams::default()
    };
    let seen = Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]])?;
    let model = DppnModel::init(
        hyper,
        Dims {
            c: 6,
            n_a: 3,
            n_c: 2,
        },
        &seen,
    )?;
    let x = Tensor::randn(&[6, 4], 1.0, &mut ChaCha8Rng::seed_from_u64(3));
    let a = Tensor::column_vector(vec![0.0, 1.0, 1.0])?;
    let ex = Example {
        features: &x,
        seen_index: 1,
        attributes: &a,
    };
    for (name, err) in model_gradient_check(&model, &seen, &ex, 1e-5)? {
        println!("{name:<14} {err:.2e}");
    }
    Ok(())
}
