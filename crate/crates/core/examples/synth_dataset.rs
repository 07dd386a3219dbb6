//! Generates the reference synthetic dataset, writes it to disk and reads it back.
//!
//! `cargo run --release --example synth_dataset [out_dir]`

use dppn::dataset::load_dataset;
use dppn::synth::{generate_synthetic, max_overlap, SyntheticConfig};

fn main() -> dppn::error::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| {
        std::env::temp_dir()
            .join("dppn-synth")
            .display()
            .to_string()
    });
    let cfg = SyntheticConfig::reference();
    let ds = generate_synthetic(&cfg)?;
    let manifest = ds.save(&out)?;
    let back = load_dataset(&manifest)?;

    println!("manifest      {}", manifest.display());
    println!("C x N         {} x {}", back.channels(), back.regions());
    println!("attributes    {}", back.n_attributes());
    println!("seen ids      {:?}", back.seen_ids);
    println!("unseen ids    {:?}", back.unseen_ids);
    println!("train / test  {} / {}", back.train.len(), back.test.len());
    if let Some(sig) = &back.signatures {
        println!("max overlap   {:.3}", max_overlap(sig));
    }
    if let Some(planted) = &back.planted {
        let row: Vec<String> = planted[0]
            .iter()
            .map(|r| r.map_or("-".into(), |r| r.to_string()))
            .collect();
        println!("test sample 0 planted regions: [{}]", row.join(" "));
    }
    Ok(())
}
