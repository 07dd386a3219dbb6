//! Mini-batch Adam over the per-sample objective.
//!
//! Each sample gets its own graph so a batch can run in parallel; gradients
//! are summed in sample order afterwards, which keeps runs bit-reproducible.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::Graph;
use crate::checkpoint::Checkpoint;
use crate::dataset::{GzslDataset, Sample};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_model, extent_mismatch};
use crate::model::{total_loss, Dims, DppnModel, ForwardCtx, Hyperparams, SHUFFLE_STREAM};
use crate::optim::{adam_step, AdamState};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch.
    pub loss: f64,
    /// H on the dataset's test split, when validation is enabled.
    pub val_h: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainOptions {
    /// Evaluate H after every epoch (logging only).
    pub validate: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { validate: true }
    }
}

/// A fresh model sized for `dataset`.
pub fn init_model(hyper: Hyperparams, dataset: &GzslDataset) -> Result<DppnModel> {
    let dims = Dims {
        c: dataset.channels(),
        n_a: dataset.n_attributes(),
        n_c: dataset.n_seen(),
    };
    DppnModel::init(hyper, dims, &dataset.seen_attribute_matrix()?)
}

pub fn train(dataset: &GzslDataset, model: DppnModel) -> Result<(Checkpoint, TrainLog)> {
    train_with(dataset, model, TrainOptions::default())
}

pub fn train_with(
    dataset: &GzslDataset,
    mut model: DppnModel,
    opts: TrainOptions,
) -> Result<(Checkpoint, TrainLog)> {
    if dataset.train.is_empty() {
        return Err(Error::Train("empty training set".into()));
    }
    if let Some(msg) = extent_mismatch(&model, dataset) {
        return Err(Error::Train(msg));
    }
    let prepared = prepare(dataset)?;
    let seen_attributes = dataset.seen_attribute_matrix()?;

    let hyper = model.hyper.clone();
    let frozen = model.frozen_names();
    let mut states: BTreeMap<String, AdamState> = model
        .named_tensors()
        .into_iter()
        .filter(|(name, _)| !frozen.contains(&name.as_str()))
        .map(|(name, t)| (name, AdamState::new(t.shape(), hyper.lr)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut log = TrainLog::default();

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(hyper.batch) {
            let (loss, grads) = batch_gradients(&model, &seen_attributes, &prepared, batch)?;
            loss_sum += loss;
            let scale = 1.0 / batch.len() as f64;
            for (name, param) in model.named_tensors_mut() {
                if let (Some(state), Some(g)) = (states.get_mut(&name), grads.get(&name)) {
                    adam_step(param, &g.map(|v| v * scale), state)?;
                }
            }
        }
        let val_h = if opts.validate {
            Some(evaluate_model(&model, dataset)?.h)
        } else {
            None
        };
        log.epochs.push(EpochLog {
            epoch,
            loss: loss_sum / prepared.len() as f64,
            val_h,
        });
    }
    Ok((Checkpoint::new(model, hyper.epochs), log))
}

struct Prepared<'d> {
    sample: &'d Sample,
    seen_index: usize,
    attributes: Tensor,
}

fn prepare(dataset: &GzslDataset) -> Result<Vec<Prepared<'_>>> {
    dataset
        .train
        .iter()
        .map(|s| {
            let seen_index = dataset.seen_index(s.label).ok_or_else(|| {
                Error::Train(format!("training label {} is not a seen category", s.label))
            })?;
            Ok(Prepared {
                sample: s,
                seen_index,
                attributes: dataset.attribute_vector(s.label)?,
            })
        })
        .collect()
}

/// Summed loss and summed gradients of the batch, keyed by parameter name.
fn batch_gradients(
    model: &DppnModel,
    seen_attributes: &Tensor,
    prepared: &[Prepared<'_>],
    batch: &[usize],
) -> Result<(f64, BTreeMap<String, Tensor>)> {
    let per_sample: Vec<(f64, BTreeMap<String, Tensor>)> = batch
        .par_iter()
        .map(|&i| sample_gradients(model, seen_attributes, &prepared[i]))
        .collect::<Result<_>>()?;
    let mut iter = per_sample.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        for (name, t) in g {
            grads
                .get_mut(&name)
                .expect("same parameters")
                .add_assign(&t);
        }
    }
    Ok((loss, grads))
}

fn sample_gradients(
    model: &DppnModel,
    seen_attributes: &Tensor,
    p: &Prepared<'_>,
) -> Result<(f64, BTreeMap<String, Tensor>)> {
    let mut g = Graph::new();
    let ctx = ForwardCtx::new(&mut g, model, seen_attributes)?;
    let terms = total_loss(
        &mut g,
        &ctx,
        &model.hyper,
        &p.sample.features,
        p.seen_index,
        &p.attributes,
    )?;
    let grads = g.backward(terms.total)?;
    let loss = g.value(terms.total).item();
    let by_name = ctx
        .vars
        .by_name
        .iter()
        .map(|(n, &v)| (n.clone(), grads.get(v)))
        .collect();
    Ok((loss, by_name))
}

/// Mean per-sample training loss of `model` over the whole training split.
pub fn mean_training_loss(model: &DppnModel, dataset: &GzslDataset) -> Result<f64> {
    let prepared = prepare(dataset)?;
    let seen_attributes = dataset.seen_attribute_matrix()?;
    let all: Vec<usize> = (0..prepared.len()).collect();
    let (loss, _) = batch_gradients(model, &seen_attributes, &prepared, &all)?;
    Ok(loss / prepared.len() as f64)
}
