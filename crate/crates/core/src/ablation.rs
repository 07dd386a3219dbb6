//! Multi-seed variant grids with median-H summaries.
//!
//! Grid file format, one entry per line, `#` comments:
//!
//! ```text
//! preset=synthetic-reference     # shared settings, applied to every variant
//! epochs=30
//! base-v2s: variant=base K=1     # name: space-separated key=value delta
//! dppn-k3: variant=dppn K=3
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::GzslDataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_model, GzslReport};
use crate::model::Hyperparams;
use crate::train::{init_model, train_with, TrainOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct AblationVariant {
    pub name: String,
    /// Settings that differ from the grid's base.
    pub delta: Vec<(String, String)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AblationGrid {
    pub base: Vec<(String, String)>,
    pub variants: Vec<AblationVariant>,
}

fn pair(token: &str, lineno: usize) -> Result<(String, String)> {
    let (k, v) = token.split_once('=').ok_or_else(|| {
        Error::Config(format!(
            "grid line {lineno}: expected key=value, got {token:?}"
        ))
    })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl AblationGrid {
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid = AblationGrid::default();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once(':') {
                Some((name, rest)) => {
                    let name = name.trim();
                    if name.is_empty() || name.contains(',') {
                        return Err(Error::Config(format!(
                            "grid line {lineno}: bad variant name {name:?}"
                        )));
                    }
                    if grid.variants.iter().any(|v| v.name == name) {
                        return Err(Error::Config(format!(
                            "grid line {lineno}: duplicate variant {name:?}"
                        )));
                    }
                    let delta = rest
                        .split_whitespace()
                        .map(|t| pair(t, lineno))
                        .collect::<Result<_>>()?;
                    grid.variants.push(AblationVariant {
                        name: name.to_string(),
                        delta,
                    });
                }
                None => grid.base.push(pair(line, lineno)?),
            }
        }
        if grid.variants.is_empty() {
            return Err(Error::Config("grid declares no variants".into()));
        }
        for v in &grid.variants {
            grid.hyperparams(v)?;
        }
        Ok(grid)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Settings of `variant`: base pairs, then its delta.
    pub fn hyperparams(&self, variant: &AblationVariant) -> Result<Hyperparams> {
        Hyperparams::from_settings(
            self.base
                .iter()
                .chain(&variant.delta)
                .map(|(k, v)| (k.as_str(), v.as_str())),
        )
    }

    /// The rows of the PCC/PAL table plus the `K = 2, 3` points of the full
    /// model, on the synthetic reference settings.
    pub fn table1() -> Self {
        Self::parse(
            "preset=synthetic-reference\n\
             base-v2s: variant=base K=1\n\
             +pcc: variant=pcc K=1\n\
             +pal: variant=pal K=1\n\
             +pcc&pal-k1: variant=dppn K=1\n\
             +pcc&pal-k2: variant=dppn K=2\n\
             +pcc&pal-k3: variant=dppn K=3\n",
        )
        .expect("built-in grid parses")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub seed: u64,
    /// The report, or the error message when training or evaluation failed.
    pub outcome: std::result::Result<GzslReport, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    /// Variant-major, seed-minor, in grid order.
    pub rows: Vec<AblationRow>,
}

/// Trains and evaluates every variant once per seed `0..seeds`. A failing
/// run is recorded and the grid continues.
pub fn run_ablation(
    grid: &AblationGrid,
    dataset: &GzslDataset,
    seeds: usize,
) -> Result<AblationReport> {
    if seeds == 0 {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let jobs: Vec<(&AblationVariant, u64)> = grid
        .variants
        .iter()
        .flat_map(|v| (0..seeds as u64).map(move |s| (v, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(variant, seed)| AblationRow {
            variant: variant.name.clone(),
            seed,
            outcome: run_one(grid, variant, seed, dataset).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(AblationReport { rows })
}

fn run_one(
    grid: &AblationGrid,
    variant: &AblationVariant,
    seed: u64,
    dataset: &GzslDataset,
) -> Result<GzslReport> {
    let mut hyper = grid.hyperparams(variant)?;
    hyper.seed = seed;
    let model = init_model(hyper, dataset)?;
    let (ckpt, _) = train_with(dataset, model, TrainOptions { validate: false })?;
    evaluate_model(&ckpt.model, dataset)
}

/// Median of a non-empty list; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

impl AblationReport {
    /// Variant names in first-seen order.
    pub fn variants(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.variant.as_str()) {
                out.push(&r.variant);
            }
        }
        out
    }

    /// Median H over the successful seeds of `variant`.
    pub fn median_h(&self, variant: &str) -> Option<f64> {
        let hs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.variant == variant)
            .filter_map(|r| r.outcome.as_ref().ok().map(|rep| rep.h))
            .collect();
        median(&hs)
    }

    pub fn failed(&self, variant: &str) -> bool {
        self.rows
            .iter()
            .any(|r| r.variant == variant && r.outcome.is_err())
    }

    /// `variant,seed,mca_u,mca_s,h,status`; failed runs leave the numbers
    /// empty and carry the error in `status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,seed,mca_u,mca_s,h,status\n");
        for r in &self.rows {
            match &r.outcome {
                Ok(rep) => {
                    let _ = writeln!(
                        out,
                        "{},{},{:.4},{:.4},{:.4},ok",
                        r.variant, r.seed, rep.mca_u, rep.mca_s, rep.h
                    );
                }
                Err(msg) => {
                    let msg = msg.replace('"', "'");
                    let _ = writeln!(out, "{},{},,,,\"failed: {msg}\"", r.variant, r.seed);
                }
            }
        }
        out
    }

    /// One line per variant: median H and the per-seed values.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for name in self.variants() {
            let hs: Vec<String> = self
                .rows
                .iter()
                .filter(|r| r.variant == name)
                .map(|r| match &r.outcome {
                    Ok(rep) => format!("{:.1}", rep.h),
                    Err(_) => "failed".into(),
                })
                .collect();
            let med = self
                .median_h(name)
                .map_or("-".into(), |m| format!("{m:.1}"));
            let _ = writeln!(out, "{name:<16} median H {med:>5}  [{}]", hs.join(" "));
        }
        out
    }
}
