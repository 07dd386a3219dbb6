//! Scores one test sample against every category and shows the distances
//! behind the prediction.
//!
//! `cargo run --release --example inference [sample]`

use dppn::dataset::Domain;
use dppn::model::{Hyperparams, Predictor};
use dppn::synth::{generate_synthetic, SyntheticConfig};
use dppn::train::{init_model, train_with, TrainOptions};

fn main() -> dppn::error::Result<()> {
    let idx = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let ds = generate_synthetic(&SyntheticConfig::reference())?;
    let mut hyper = Hyperparams::synthetic_reference();
    hyper.k = 1;
    let (ckpt, _) = train_with(
        &ds,
        init_model(hyper, &ds)?,
        TrainOptions { validate: false },
    )?;

    let predictor = Predictor::new(&ckpt.model, &ds.attributes, &ds.all_ids())?;
    let sample = ds.test.get(idx).ok_or(dppn::error::Error::Index {
        what: "test split",
        index: idx,
        len: ds.test.len(),
    })?;
    let d = predictor.distances(&sample.features)?;
    for (id, dist) in predictor.candidates().iter().zip(&d) {
        let tag = if ds.unseen_ids.contains(id) {
            "unseen"
        } else {
            "seen"
        };
        println!("category {id:>2} ({tag:<6}) distance {dist:.4}");
    }
    let domain = if sample.domain == Domain::Unseen {
        "unseen"
    } else {
        "seen"
    };
    println!(
        "sample {idx}: true {} ({domain}), predicted {}",
        sample.label,
        predictor.predict(&sample.features)?
    );
    Ok(())
}
