//! Runs the PCC/PAL ablation grid and prints median H per variant.
//!
//! `cargo run --release --example ablation_table [seeds]`

use dppn::ablation::{run_ablation, AblationGrid};
use dppn::synth::{generate_synthetic, SyntheticConfig};

fn main() -> dppn::error::Result<()> {
    let seeds = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let ds = generate_synthetic(&SyntheticConfig::reference())?;
    let grid = AblationGrid::table1();
    for v in &grid.variants {
        let delta: Vec<String> = v.delta.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<14} {}", v.name, delta.join(" "));
    }
    let report = run_ablation(&grid, &ds, seeds)?;
    println!();
    print!("{}", report.summary());
    Ok(())
}
