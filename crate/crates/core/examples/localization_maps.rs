//! Exports similarity maps of a trained model and summarizes how much mass
//! each iteration puts on the planted regions.
//!
//! `cargo run --release --example localization_maps [out_dir]`

use dppn::localization::{export_localization, planted_stats};
use dppn::model::Hyperparams;
use dppn::synth::{generate_synthetic, SyntheticConfig};
use dppn::train::{init_model, train_with, TrainOptions};

fn main() -> dppn::error::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("dppn-maps").display().to_string());
    let ds = generate_synthetic(&SyntheticConfig::reference())?;
    let hyper = Hyperparams::synthetic_reference();
    let (ckpt, _) = train_with(
        &ds,
        init_model(hyper, &ds)?,
        TrainOptions { validate: false },
    )?;

    let exports = export_localization(&ckpt, &ds, &[0, 1], &out)?;
    for e in &exports {
        let images: usize = e.pgm.iter().map(Vec::len).sum();
        println!(
            "sample {}: {} similarity tables, {images} images",
            e.sample,
            e.csv.len()
        );
    }
    println!("written to {out}");

    let stats = planted_stats(&ckpt.model, &ds)?;
    for (k, (m, h)) in stats.mass.iter().zip(&stats.hit_rate).enumerate() {
        println!(
            "S^{}: planted mass {m:.3}, argmax hit rate {:.1}%",
            k + 1,
            100.0 * h
        );
    }
    Ok(())
}
