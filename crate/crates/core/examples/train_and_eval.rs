//! Trains the full model on the reference dataset and reports GZSL metrics.
//!
//! `cargo run --release --example train_and_eval [K]`

use dppn::metrics::evaluate_gzsl;
use dppn::model::Hyperparams;
use dppn::synth::{generate_synthetic, SyntheticConfig};
use dppn::train::{init_model, train};

fn main() -> dppn::error::Result<()> {
    let k = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2);
    let ds = generate_synthetic(&SyntheticConfig::reference())?;
    let mut hyper = Hyperparams::synthetic_reference();
    hyper.k = k;

    let (ckpt, log) = train(&ds, init_model(hyper, &ds)?)?;
    for e in log.epochs.iter().step_by(5).chain(log.epochs.last()) {
        println!(
            "epoch {:>2}  loss {:.4}  val H {:.1}",
            e.epoch,
            e.loss,
            e.val_h.unwrap_or(0.0)
        );
    }
    let r = evaluate_gzsl(&ckpt, &ds)?;
    println!(
        "K={k}: MCA_u {:.1}  MCA_s {:.1}  H {:.1}  (seen->unseen {}, unseen->seen {})",
        r.mca_u, r.mca_s, r.h, r.seen_as_unseen, r.unseen_as_seen
    );
    Ok(())
}
