//! Synthetic GZSL data with a planted attribute-to-region correspondence.
//!
//! Each attribute owns a unit signature in channel space. A sample of
//! category `y` adds `strength · wᵢ` to one distinct random region for every
//! attribute active in `a_y`, then Gaussian noise everywhere. Unseen
//! categories draw their attribute vectors the same way and only appear in
//! the test split.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::KeyValues;
use crate::dataset::{Domain, GzslDataset, Sample, TestSample};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Largest allowed `|wᵢ·wⱼ|` between distinct signatures.
pub const MAX_SIGNATURE_OVERLAP: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub c: usize,
    pub n: usize,
    pub n_a: usize,
    pub n_seen: usize,
    pub n_unseen: usize,
    pub samples_per_class: usize,
    /// Fraction of attributes active per category.
    pub density: f64,
    pub strength: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
    /// Fraction of each seen category's samples held out for testing.
    pub test_fraction: f64,
}

impl SyntheticConfig {
    /// The benchmark every trend check runs on.
    pub fn reference() -> Self {
        Self {
            c: 32,
            n: 16,
            n_a: 12,
            n_seen: 8,
            n_unseen: 4,
            samples_per_class: 40,
            density: 0.33,
            strength: 3.0,
            noise: 0.5,
            seed: 0,
            test_fraction: 0.2,
        }
    }

    /// Active attributes per category.
    pub fn active_per_class(&self) -> usize {
        (self.density * self.n_a as f64).round() as usize
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for key {key}")))
        }
        match key {
            "C" => self.c = parse(key, value)?,
            "N" => self.n = parse(key, value)?,
            "N_a" => self.n_a = parse(key, value)?,
            "seen" => self.n_seen = parse(key, value)?,
            "unseen" => self.n_unseen = parse(key, value)?,
            "samples_per_class" => self.samples_per_class = parse(key, value)?,
            "density" => self.density = parse(key, value)?,
            "strength" => self.strength = parse(key, value)?,
            "noise" => self.noise = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown synthetic key {key:?}"))),
        }
        Ok(())
    }

    /// Reference config overridden by the given pairs.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut cfg = Self::reference();
        for (k, v) in kv.iter() {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.c == 0 || self.n == 0 || self.n_a == 0 {
            return bad("C, N and N_a must be positive".into());
        }
        if self.n_seen == 0 || self.n_unseen == 0 {
            return bad("need at least one seen and one unseen category".into());
        }
        if self.samples_per_class < 2 {
            return bad("need at least two samples per category".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad(format!(
                "test_fraction {} outside [0, 1)",
                self.test_fraction
            ));
        }
        let m = self.active_per_class();
        if m == 0 {
            return Err(Error::Dataset(format!(
                "density {} activates no attributes: every attribute vector would be zero",
                self.density
            )));
        }
        if m > self.n_a {
            return bad(format!(
                "density {} activates more than N_a attributes",
                self.density
            ));
        }
        if m > self.n {
            return Err(Error::Dataset(format!(
                "N = {} regions cannot host {m} distinct planted attributes",
                self.n
            )));
        }
        if !(self.noise >= 0.0 && self.strength.is_finite()) {
            return bad("noise must be >= 0 and strength finite".into());
        }
        Ok(())
    }
}

/// `N_a × C` unit signatures with pairwise overlap below
/// [`MAX_SIGNATURE_OVERLAP`], redrawn until the bound holds.
pub fn draw_signatures<R: Rng + ?Sized>(n_a: usize, c: usize, rng: &mut R) -> Result<Tensor> {
    for _ in 0..1000 {
        let mut w = Tensor::randn(&[n_a, c], 1.0, rng);
        for i in 0..n_a {
            let row = &mut w.data_mut()[i * c..(i + 1) * c];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.iter_mut().for_each(|v| *v /= norm);
        }
        if max_overlap(&w) < MAX_SIGNATURE_OVERLAP {
            return Ok(w);
        }
    }
    Err(Error::Dataset(format!(
        "could not draw {n_a} signatures in {c} channels with overlap < {MAX_SIGNATURE_OVERLAP}"
    )))
}

/// `max |wᵢ·wⱼ|` over distinct rows.
pub fn max_overlap(w: &Tensor) -> f64 {
    let n = w.rows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = w.row(i).iter().zip(w.row(j)).map(|(a, b)| a * b).sum();
            worst = worst.max(dot.abs());
        }
    }
    worst
}

struct Planted {
    features: Tensor,
    regions: Vec<Option<usize>>,
}

fn plant_sample<R: Rng + ?Sized>(
    cfg: &SyntheticConfig,
    signatures: &Tensor,
    attributes: &[f64],
    noise: &Normal<f64>,
    rng: &mut R,
) -> Planted {
    let (c, n) = (cfg.c, cfg.n);
    let mut x = Tensor::zeros(&[c, n]);
    let active: Vec<usize> = (0..cfg.n_a).filter(|&i| attributes[i] != 0.0).collect();
    let slots = index::sample(rng, n, active.len());
    let mut regions = vec![None; cfg.n_a];
    for (&attr, region) in active.iter().zip(slots.iter()) {
        regions[attr] = Some(region);
        let w = signatures.row(attr);
        for (ch, &wc) in w.iter().enumerate().take(c) {
            let v = x.at(ch, region) + cfg.strength * attributes[attr] * wc;
            x.set(ch, region, v);
        }
    }
    if cfg.noise > 0.0 {
        for v in x.data_mut() {
            *v += noise.sample(rng);
        }
    }
    Planted {
        features: x,
        regions,
    }
}

/// Generates a dataset; identical configs give identical datasets.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<GzslDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let signatures = draw_signatures(cfg.n_a, cfg.c, &mut rng)?;

    let n_cat = cfg.n_seen + cfg.n_unseen;
    let m = cfg.active_per_class();
    let mut seen_patterns = BTreeSet::new();
    let mut attributes = Tensor::zeros(&[n_cat, cfg.n_a]);
    for id in 0..n_cat {
        let mut drawn = None;
        for _ in 0..1000 {
            let mut active: Vec<usize> = index::sample(&mut rng, cfg.n_a, m).into_vec();
            active.sort_unstable();
            if seen_patterns.insert(active.clone()) {
                drawn = Some(active);
                break;
            }
        }
        let active = drawn.ok_or_else(|| {
            Error::Dataset(format!(
                "cannot draw {n_cat} distinct attribute vectors with {m} of {} active",
                cfg.n_a
            ))
        })?;
        for i in active {
            attributes.set(id, i, 1.0);
        }
    }

    let mut ids: Vec<usize> = (0..n_cat).collect();
    ids.shuffle(&mut rng);
    let mut seen_ids = ids[..cfg.n_seen].to_vec();
    let mut unseen_ids = ids[cfg.n_seen..].to_vec();
    seen_ids.sort_unstable();
    unseen_ids.sort_unstable();

    let noise = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("valid std");
    let n_test_seen = ((cfg.samples_per_class as f64) * cfg.test_fraction).round() as usize;
    let n_train = cfg.samples_per_class - n_test_seen;

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut planted = Vec::new();
    for id in 0..n_cat {
        let is_seen = seen_ids.contains(&id);
        for s in 0..cfg.samples_per_class {
            let p = plant_sample(cfg, &signatures, attributes.row(id), &noise, &mut rng);
            if is_seen && s < n_train {
                train.push(Sample {
                    features: p.features,
                    label: id,
                });
            } else {
                test.push(TestSample {
                    features: p.features,
                    label: id,
                    domain: if is_seen {
                        Domain::Seen
                    } else {
                        Domain::Unseen
                    },
                });
                planted.push(p.regions);
            }
        }
    }

    let dataset = GzslDataset {
        train,
        test,
        attributes,
        seen_ids,
        unseen_ids,
        planted: Some(planted),
        signatures: Some(signatures),
    };
    dataset.validate()?;
    Ok(dataset)
}
