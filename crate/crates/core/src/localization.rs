//! Export of `S¹..Sᴷ` as CSV tables and per-attribute grayscale PGM maps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::dataset::GzslDataset;
use crate::error::{Error, Result};
use crate::model::{similarity_maps, DppnModel};
use crate::tensor::Tensor;

/// `(width, height)` of the region grid: height is the largest divisor of
/// `n` not above `√n`, so square counts give square grids.
pub fn grid_shape(n: usize) -> (usize, usize) {
    let h = (1..=n)
        .take_while(|d| d * d <= n)
        .filter(|&d| n.is_multiple_of(d))
        .last()
        .unwrap_or(1);
    (n / h.max(1), h)
}

/// One column of `S` scaled linearly to `[0, 255]`. A constant column maps
/// to all zeros.
pub fn scale_column(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
        .collect()
}

/// Binary PGM (`P5`, maxval 255), row-major pixels.
pub fn pgm_bytes(pixels: &[u8], width: usize, height: usize) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::Dimension {
            op: "pgm",
            msg: format!("{} pixels for a {width}x{height} image", pixels.len()),
        });
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

/// `S` as CSV: one row per region, one column per attribute, values rounded
/// to `f32`.
pub fn similarity_csv(s: &Tensor) -> Result<String> {
    let (rows, cols) = s.dims2()?;
    let mut out = String::new();
    let header: Vec<String> = (0..cols).map(|i| format!("attr{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..rows {
        let line: Vec<String> = s.row(r).iter().map(|&v| (v as f32).to_string()).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    Ok(out)
}

/// Files written for one test sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleExport {
    pub sample: usize,
    /// One CSV per iteration `k = 1..K`.
    pub csv: Vec<PathBuf>,
    /// `pgm[k-1][i]` is attribute `i`'s map at iteration `k`.
    pub pgm: Vec<Vec<PathBuf>>,
}

/// Writes `sample<id>_k<k>.csv` and `sample<id>_k<k>_attr<i>.pgm` for every
/// requested test sample. Ids index `dataset.test`.
pub fn export_localization(
    checkpoint: &Checkpoint,
    dataset: &GzslDataset,
    samples: &[usize],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<SampleExport>> {
    let out_dir = out_dir.as_ref();
    for &id in samples {
        if id >= dataset.test.len() {
            return Err(Error::Index {
                what: "test split",
                index: id,
                len: dataset.test.len(),
            });
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (width, height) = grid_shape(dataset.regions());
    let write = |name: String, bytes: &[u8]| -> Result<PathBuf> {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };

    let mut exports = Vec::with_capacity(samples.len());
    for &id in samples {
        let maps = similarity_maps(&checkpoint.model, &dataset.test[id].features)?;
        let mut export = SampleExport {
            sample: id,
            csv: Vec::new(),
            pgm: Vec::new(),
        };
        for (k, s) in maps.iter().enumerate().map(|(i, s)| (i + 1, s)) {
            export.csv.push(write(
                format!("sample{id}_k{k}.csv"),
                similarity_csv(s)?.as_bytes(),
            )?);
            let mut per_attr = Vec::with_capacity(s.cols());
            for i in 0..s.cols() {
                let img = pgm_bytes(&scale_column(&s.column(i)), width, height)?;
                per_attr.push(write(format!("sample{id}_k{k}_attr{i}.pgm"), &img)?);
            }
            export.pgm.push(per_attr);
        }
        exports.push(export);
    }
    Ok(exports)
}

/// How well `S¹..Sᴷ` find the planted regions of active attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedStats {
    /// Mean mass `Sᵏ` puts on the planted region, per `k`.
    pub mass: Vec<f64>,
    /// Fraction of active attributes whose `argmax Sᵏ` is the planted region.
    pub hit_rate: Vec<f64>,
    /// Active (sample, attribute) pairs counted.
    pub active: usize,
}

/// Planted-region statistics over the test split of a synthetic dataset.
pub fn planted_stats(model: &DppnModel, dataset: &GzslDataset) -> Result<PlantedStats> {
    let planted = dataset
        .planted
        .as_ref()
        .ok_or_else(|| Error::Dataset("dataset has no planted map".into()))?;
    let k = model.hyper.k;
    let per_sample: Vec<(Vec<f64>, Vec<usize>, usize)> = dataset
        .test
        .par_iter()
        .zip(planted)
        .map(|(s, regions)| {
            let maps = similarity_maps(model, &s.features)?;
            let (mut mass, mut hits, mut active) = (vec![0.0; k], vec![0; k], 0);
            for (i, r) in regions.iter().enumerate() {
                let Some(r) = *r else { continue };
                active += 1;
                for (j, sk) in maps.iter().enumerate() {
                    let col = sk.column(i);
                    mass[j] += col[r];
                    hits[j] += usize::from(argmax(&col) == r);
                }
            }
            Ok((mass, hits, active))
        })
        .collect::<Result<_>>()?;
    let (mut mass, mut hits, mut active) = (vec![0.0; k], vec![0usize; k], 0);
    for (m, h, a) in per_sample {
        active += a;
        for j in 0..k {
            mass[j] += m[j];
            hits[j] += h[j];
        }
    }
    if active == 0 {
        return Err(Error::Dataset(
            "no active attributes in the test split".into(),
        ));
    }
    Ok(PlantedStats {
        mass: mass.iter().map(|m| m / active as f64).collect(),
        hit_rate: hits.iter().map(|&h| h as f64 / active as f64).collect(),
        active,
    })
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
