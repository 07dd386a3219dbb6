//! GZSL metrics and whole-split evaluation.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::dataset::{Domain, GzslDataset};
use crate::error::{Error, Result};
use crate::model::{DppnModel, Predictor};

/// Mean over `classes` of per-class top-1 accuracy, in percent.
pub fn mca(predictions: &[usize], labels: &[usize], classes: &[usize]) -> Result<f64> {
    Ok(per_class_accuracy(predictions, labels, classes)?
        .values()
        .sum::<f64>()
        / classes.len() as f64)
}

/// Per-class accuracy in percent for every class in `classes`.
pub fn per_class_accuracy(
    predictions: &[usize],
    labels: &[usize],
    classes: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if predictions.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if classes.is_empty() {
        return Err(Error::Eval("empty class set".into()));
    }
    let mut tally: BTreeMap<usize, (usize, usize)> = classes.iter().map(|&c| (c, (0, 0))).collect();
    for (&p, &y) in predictions.iter().zip(labels) {
        if let Some((hit, total)) = tally.get_mut(&y) {
            *total += 1;
            *hit += usize::from(p == y);
        }
    }
    tally
        .into_iter()
        .map(|(c, (hit, total))| {
            if total == 0 {
                Err(Error::Eval(format!("class {c} has no samples")))
            } else {
                Ok((c, 100.0 * hit as f64 / total as f64))
            }
        })
        .collect()
}

/// `2us/(u+s)`, or 0 when both are 0.
pub fn harmonic_mean(mca_u: f64, mca_s: f64) -> f64 {
    if mca_u + mca_s > 0.0 {
        2.0 * mca_u * mca_s / (mca_u + mca_s)
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GzslReport {
    pub mca_u: f64,
    pub mca_s: f64,
    pub h: f64,
    /// Accuracy in percent per category id, both domains.
    pub per_class: BTreeMap<usize, f64>,
    /// Seen-domain samples predicted as an unseen category.
    pub seen_as_unseen: usize,
    /// Unseen-domain samples predicted as a seen category.
    pub unseen_as_seen: usize,
    pub n_seen_samples: usize,
    pub n_unseen_samples: usize,
}

impl GzslReport {
    pub fn from_predictions(dataset: &GzslDataset, predictions: &[usize]) -> Result<Self> {
        if predictions.len() != dataset.test.len() {
            return Err(Error::Eval(format!(
                "{} predictions for {} test samples",
                predictions.len(),
                dataset.test.len()
            )));
        }
        let mut split: BTreeMap<bool, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        let (mut seen_as_unseen, mut unseen_as_seen) = (0, 0);
        for (s, &p) in dataset.test.iter().zip(predictions) {
            let unseen = s.domain == Domain::Unseen;
            let pred_unseen = dataset.unseen_ids.contains(&p);
            match (unseen, pred_unseen) {
                (false, true) => seen_as_unseen += 1,
                (true, false) => unseen_as_seen += 1,
                _ => {}
            }
            let entry = split.entry(unseen).or_default();
            entry.0.push(p);
            entry.1.push(s.label);
        }
        let (Some((pu, yu)), Some((ps, ys))) = (split.get(&true), split.get(&false)) else {
            return Err(Error::Eval(
                "GZSL needs test samples from both the seen and the unseen domain".into(),
            ));
        };
        let acc_u = per_class_accuracy(pu, yu, &dataset.unseen_ids)?;
        let acc_s = per_class_accuracy(ps, ys, &dataset.seen_ids)?;
        let mca_u = acc_u.values().sum::<f64>() / acc_u.len() as f64;
        let mca_s = acc_s.values().sum::<f64>() / acc_s.len() as f64;
        Ok(Self {
            mca_u,
            mca_s,
            h: harmonic_mean(mca_u, mca_s),
            per_class: acc_u.into_iter().chain(acc_s).collect(),
            seen_as_unseen,
            unseen_as_seen,
            n_seen_samples: ys.len(),
            n_unseen_samples: yu.len(),
        })
    }
}

/// Predicted category id for every test sample, over `Y_s ∪ Y_u`.
pub fn predict_test_split(model: &DppnModel, dataset: &GzslDataset) -> Result<Vec<usize>> {
    if let Some(msg) = extent_mismatch(model, dataset) {
        return Err(Error::Eval(msg));
    }
    let predictor = Predictor::new(model, &dataset.attributes, &dataset.all_ids())?;
    dataset
        .test
        .par_iter()
        .map(|s| predictor.predict(&s.features))
        .collect()
}

pub fn evaluate_model(model: &DppnModel, dataset: &GzslDataset) -> Result<GzslReport> {
    if dataset.test.is_empty() {
        return Err(Error::Eval("empty test split".into()));
    }
    if !dataset.test.iter().any(|s| s.domain == Domain::Unseen) {
        return Err(Error::Eval(
            "no unseen-domain test samples: GZSL is undefined".into(),
        ));
    }
    let predictions = predict_test_split(model, dataset)?;
    GzslReport::from_predictions(dataset, &predictions)
}

pub fn evaluate_gzsl(checkpoint: &Checkpoint, dataset: &GzslDataset) -> Result<GzslReport> {
    evaluate_model(&checkpoint.model, dataset)
}

/// Describes the first extent on which `model` and `dataset` disagree.
pub(crate) fn extent_mismatch(model: &DppnModel, dataset: &GzslDataset) -> Option<String> {
    let d = model.dims;
    let pairs = [
        ("C", d.c, dataset.channels()),
        ("N_a", d.n_a, dataset.n_attributes()),
        ("N_c", d.n_c, dataset.n_seen()),
    ];
    for (name, model_v, data_v) in pairs {
        if model_v != data_v {
            return Some(format!(
                "model has {name} = {model_v}, dataset has {name} = {data_v}"
            ));
        }
    }
    None
}
