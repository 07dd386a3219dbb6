//! GZSL datasets and their on-disk manifest.
//!
//! A manifest is a `key=value` file naming `DTF1` tensors relative to the
//! manifest's directory:
//!
//! | key              | shape            | contents                              |
//! |------------------|------------------|---------------------------------------|
//! | `train_features` | `[n, C, N]`      | seen-class training feature maps      |
//! | `train_labels`   | `[n]`            | category ids                          |
//! | `test_features`  | `[m, C, N]`      | held-out feature maps                 |
//! | `test_labels`    | `[m]`            | category ids                          |
//! | `test_domains`   | `[m]`            | 0 = seen, 1 = unseen                  |
//! | `attributes`     | `[n_cat, N_a]`   | one row per category id               |
//! | `seen_ids`       | `[n_seen]`       | category ids                          |
//! | `unseen_ids`     | `[n_unseen]`     | category ids                          |
//! | `planted_map`    | `[m, N_a]`       | optional, region per attribute or -1  |
//! | `signatures`     | `[N_a, C]`       | optional, planted attribute patterns  |
//!
//! Optional scalar keys `C`, `N`, `N_a` are checked against the tensors.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tensor_file::{load_tensor, save_tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Seen,
    Unseen,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `C×N` feature map.
    pub features: Tensor,
    /// Category id.
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestSample {
    pub features: Tensor,
    pub label: usize,
    pub domain: Domain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GzslDataset {
    pub train: Vec<Sample>,
    pub test: Vec<TestSample>,
    /// `n_categories × N_a`, row `id` describes category `id`.
    pub attributes: Tensor,
    pub seen_ids: Vec<usize>,
    pub unseen_ids: Vec<usize>,
    /// Per test sample, the region each attribute was planted at.
    pub planted: Option<Vec<Vec<Option<usize>>>>,
    /// `N_a × C` planted attribute patterns.
    pub signatures: Option<Tensor>,
}

impl GzslDataset {
    fn first_features(&self) -> Option<&Tensor> {
        self.train
            .first()
            .map(|s| &s.features)
            .or_else(|| self.test.first().map(|s| &s.features))
    }

    pub fn channels(&self) -> usize {
        self.first_features().map_or(0, |t| t.rows())
    }

    pub fn regions(&self) -> usize {
        self.first_features().map_or(0, |t| t.cols())
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.cols()
    }

    pub fn n_seen(&self) -> usize {
        self.seen_ids.len()
    }

    /// All category ids, ascending.
    pub fn all_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .seen_ids
            .iter()
            .chain(&self.unseen_ids)
            .copied()
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Position of `id` in `seen_ids`, i.e. its column in the seen table.
    pub fn seen_index(&self, id: usize) -> Option<usize> {
        self.seen_ids.iter().position(|&s| s == id)
    }

    pub fn attribute_vector(&self, id: usize) -> Result<Tensor> {
        if id >= self.attributes.rows() {
            return Err(Error::Index {
                what: "attribute table",
                index: id,
                len: self.attributes.rows(),
            });
        }
        Tensor::column_vector(self.attributes.row(id).to_vec())
    }

    /// `N_a × N_c` matrix whose columns are the seen classes' attributes in
    /// `seen_ids` order.
    pub fn seen_attribute_matrix(&self) -> Result<Tensor> {
        let n_a = self.n_attributes();
        let n_c = self.seen_ids.len();
        let mut m = Tensor::zeros(&[n_a, n_c.max(1)]);
        for (j, &id) in self.seen_ids.iter().enumerate() {
            let row = self.attribute_vector(id)?;
            for i in 0..n_a {
                m.set(i, j, row.data()[i]);
            }
        }
        Ok(m)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Dataset(m));
        let seen: BTreeSet<usize> = self.seen_ids.iter().copied().collect();
        let unseen: BTreeSet<usize> = self.unseen_ids.iter().copied().collect();
        if seen.len() != self.seen_ids.len() || unseen.len() != self.unseen_ids.len() {
            return bad("duplicate category ids in seen/unseen lists".into());
        }
        let overlap: Vec<usize> = seen.intersection(&unseen).copied().collect();
        if !overlap.is_empty() {
            return bad(format!("seen and unseen category ids overlap: {overlap:?}"));
        }
        if seen.is_empty() {
            return bad("no seen categories".into());
        }
        let (rows, n_a) = self.attributes.dims2()?;
        if let Some(&id) = seen.iter().chain(&unseen).find(|&&id| id >= rows) {
            return bad(format!(
                "category {id} has no row in the {rows}-row attribute table"
            ));
        }
        if !self.attributes.is_finite() {
            return bad("attribute table contains non-finite values".into());
        }

        let Some(shape) = self.first_features().map(|t| t.shape().to_vec()) else {
            return bad("dataset has no samples".into());
        };
        if shape.len() != 2 {
            return bad(format!("feature maps must be C×N, got {shape:?}"));
        }
        for (i, s) in self.train.iter().enumerate() {
            if s.features.shape() != shape.as_slice() {
                return bad(format!(
                    "train sample {i} has shape {:?}, expected {shape:?}",
                    s.features.shape()
                ));
            }
            if !seen.contains(&s.label) {
                return bad(format!(
                    "train sample {i} has label {} which is not a seen category",
                    s.label
                ));
            }
        }
        for (i, s) in self.test.iter().enumerate() {
            if s.features.shape() != shape.as_slice() {
                return bad(format!(
                    "test sample {i} has shape {:?}, expected {shape:?}",
                    s.features.shape()
                ));
            }
            let domain = if seen.contains(&s.label) {
                Domain::Seen
            } else if unseen.contains(&s.label) {
                Domain::Unseen
            } else {
                return bad(format!(
                    "test sample {i} references unknown category {}",
                    s.label
                ));
            };
            if domain != s.domain {
                return bad(format!(
                    "test sample {i}: domain tag {:?} disagrees with label {}",
                    s.domain, s.label
                ));
            }
        }
        if let Some(planted) = &self.planted {
            if planted.len() != self.test.len() {
                return bad(format!(
                    "planted map has {} rows for {} test samples",
                    planted.len(),
                    self.test.len()
                ));
            }
            for (i, row) in planted.iter().enumerate() {
                if row.len() != n_a {
                    return Err(extent_error("planted map", row.len(), n_a));
                }
                if let Some(r) = row.iter().flatten().find(|&&r| r >= shape[1]) {
                    return bad(format!(
                        "planted map row {i} names region {r} of {}",
                        shape[1]
                    ));
                }
            }
        }
        if let Some(sig) = &self.signatures {
            if sig.shape() != [n_a, shape[0]] {
                return bad(format!(
                    "signatures have shape {:?}, expected [{n_a}, {}]",
                    sig.shape(),
                    shape[0]
                ));
            }
        }
        Ok(())
    }

    /// Writes every tensor next to a `manifest.cfg` in `dir`; returns the
    /// manifest path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        self.validate()?;
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = KeyValues::default();
        let mut put = |key: &str, t: &Tensor| -> Result<()> {
            let file = format!("{key}.dtf");
            save_tensor(t, dir.join(&file))?;
            manifest.insert(key, file);
            Ok(())
        };
        let ids = |v: &[usize]| Tensor::new(vec![v.len()], v.iter().map(|&i| i as f64).collect());
        let stack = |v: Vec<Tensor>| Tensor::stack(&v);

        put(
            "train_features",
            &stack(self.train.iter().map(|s| s.features.clone()).collect())?,
        )?;
        put(
            "train_labels",
            &ids(&self.train.iter().map(|s| s.label).collect::<Vec<_>>())?,
        )?;
        put(
            "test_features",
            &stack(self.test.iter().map(|s| s.features.clone()).collect())?,
        )?;
        put(
            "test_labels",
            &ids(&self.test.iter().map(|s| s.label).collect::<Vec<_>>())?,
        )?;
        let domains = self
            .test
            .iter()
            .map(|s| if s.domain == Domain::Unseen { 1.0 } else { 0.0 })
            .collect();
        put(
            "test_domains",
            &Tensor::new(vec![self.test.len()], domains)?,
        )?;
        put("attributes", &self.attributes)?;
        put("seen_ids", &ids(&self.seen_ids)?)?;
        put("unseen_ids", &ids(&self.unseen_ids)?)?;
        if let Some(planted) = &self.planted {
            let data = planted
                .iter()
                .flat_map(|row| row.iter().map(|r| r.map_or(-1.0, |r| r as f64)))
                .collect();
            put(
                "planted_map",
                &Tensor::new(vec![planted.len(), self.n_attributes()], data)?,
            )?;
        }
        if let Some(sig) = &self.signatures {
            put("signatures", sig)?;
        }
        manifest.insert("C", self.channels().to_string());
        manifest.insert("N", self.regions().to_string());
        manifest.insert("N_a", self.n_attributes().to_string());

        let path = dir.join("manifest.cfg");
        fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn extent_error(what: &str, got: usize, expected: usize) -> Error {
    Error::Dataset(format!("{what} has N_a = {got}, expected N_a = {expected}"))
}

fn to_ids(t: &Tensor, what: &str) -> Result<Vec<usize>> {
    t.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v < 16_777_216.0 {
                Ok(v as usize)
            } else {
                Err(Error::Dataset(format!("{what} contains non-id value {v}")))
            }
        })
        .collect()
}

fn unstack(t: &Tensor, what: &str) -> Result<Vec<Tensor>> {
    if t.rank() != 3 {
        return Err(Error::Dataset(format!(
            "{what} must be [n, C, N], got {:?}",
            t.shape()
        )));
    }
    (0..t.shape()[0]).map(|i| t.slice_outer(i)).collect()
}

/// Reads and fully validates a dataset from its manifest.
pub fn load_dataset(manifest: impl AsRef<Path>) -> Result<GzslDataset> {
    let manifest = manifest.as_ref();
    let kv = KeyValues::read(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let load = |key: &str| -> Result<Tensor> { load_tensor(base.join(kv.require(key)?)) };
    let load_opt = |key: &str| -> Result<Option<Tensor>> {
        kv.get(key).map(|f| load_tensor(base.join(f))).transpose()
    };

    let train_x = unstack(&load("train_features")?, "train_features")?;
    let train_y = to_ids(&load("train_labels")?, "train_labels")?;
    let test_x = unstack(&load("test_features")?, "test_features")?;
    let test_y = to_ids(&load("test_labels")?, "test_labels")?;
    let test_d = to_ids(&load("test_domains")?, "test_domains")?;
    let attributes = load("attributes")?;
    let seen_ids = to_ids(&load("seen_ids")?, "seen_ids")?;
    let unseen_ids = to_ids(&load("unseen_ids")?, "unseen_ids")?;

    if train_x.len() != train_y.len() {
        return Err(Error::Dataset(format!(
            "{} train feature maps but {} train labels",
            train_x.len(),
            train_y.len()
        )));
    }
    if test_x.len() != test_y.len() || test_x.len() != test_d.len() {
        return Err(Error::Dataset(format!(
            "test split sizes disagree: {} features, {} labels, {} domains",
            test_x.len(),
            test_y.len(),
            test_d.len()
        )));
    }
    if attributes.rank() != 2 {
        return Err(Error::Dataset(format!(
            "attributes must be a matrix, got {:?}",
            attributes.shape()
        )));
    }
    let n_a = attributes.cols();
    if let Some(expected) = kv.get("N_a") {
        let expected: usize = expected
            .parse()
            .map_err(|_| Error::Config(format!("bad N_a {expected:?}")))?;
        if expected != n_a {
            return Err(extent_error("attribute table", n_a, expected));
        }
    }
    for (key, axis) in [("C", 0usize), ("N", 1)] {
        if let (Some(v), Some(x)) = (kv.get(key), train_x.first()) {
            if v.parse::<usize>().ok() != Some(x.shape()[axis]) {
                return Err(Error::Dataset(format!(
                    "manifest says {key} = {v}, feature maps have {}",
                    x.shape()[axis]
                )));
            }
        }
    }

    let planted = match load_opt("planted_map")? {
        Some(t) => {
            let (rows, cols) = t.dims2()?;
            if cols != n_a {
                return Err(extent_error("planted map", cols, n_a));
            }
            let mut out = Vec::with_capacity(rows);
            for r in 0..rows {
                out.push(
                    t.row(r)
                        .iter()
                        .map(|&v| if v < 0.0 { None } else { Some(v as usize) })
                        .collect(),
                );
            }
            Some(out)
        }
        None => None,
    };
    let signatures = load_opt("signatures")?;
    if let Some(sig) = &signatures {
        if sig.rank() != 2 || sig.rows() != n_a {
            return Err(extent_error("signature table", sig.rows(), n_a));
        }
    }

    let dataset = GzslDataset {
        train: train_x
            .into_iter()
            .zip(train_y)
            .map(|(features, label)| Sample { features, label })
            .collect(),
        test: test_x
            .into_iter()
            .zip(test_y)
            .zip(test_d)
            .map(|((features, label), d)| TestSample {
                features,
                label,
                domain: if d == 1 { Domain::Unseen } else { Domain::Seen },
            })
            .collect(),
        attributes,
        seen_ids,
        unseen_ids,
        planted,
        signatures,
    };
    dataset.validate()?;
    Ok(dataset)
}
