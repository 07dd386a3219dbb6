//! Checkpoint directories: one `DTF1` file per parameter plus `meta.cfg`.

use std::fs;
use std::path::Path;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::model::{Dims, DppnModel, Hyperparams};
use crate::tensor::Tensor;
use crate::tensor_file::{load_tensor, save_tensor};

pub const META_FILE: &str = "meta.cfg";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: DppnModel,
    /// Epochs completed when the checkpoint was taken.
    pub epoch: usize,
}

impl Checkpoint {
    pub fn new(model: DppnModel, epoch: usize) -> Self {
        Self { model, epoch }
    }

    pub fn meta(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        for (k, v) in self.model.hyper.to_pairs() {
            kv.insert(k, v);
        }
        let Dims { c, n_a, n_c } = self.model.dims;
        kv.insert("C", c.to_string());
        kv.insert("N_a", n_a.to_string());
        kv.insert("N_c", n_c.to_string());
        kv.insert("epoch", self.epoch.to_string());
        kv
    }

    /// Writes the checkpoint into `dir`, creating it if needed. Values are
    /// stored as `f32`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, t) in self.model.named_tensors() {
            save_tensor(t, dir.join(format!("{name}.dtf")))?;
        }
        let meta = dir.join(META_FILE);
        fs::write(&meta, self.meta().to_text()).map_err(|e| Error::io(&meta, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let kv = KeyValues::read(dir.join(META_FILE))?;
        let mut hyper = Hyperparams::default();
        let mut dims = Dims {
            c: 0,
            n_a: 0,
            n_c: 0,
        };
        let mut epoch = 0;
        for (k, v) in kv.iter() {
            let num = || {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("{META_FILE}: bad value {v:?} for {k}")))
            };
            match k {
                "C" => dims.c = num()?,
                "N_a" => dims.n_a = num()?,
                "N_c" => dims.n_c = num()?,
                "epoch" => epoch = num()?,
                _ => hyper.set(k, v)?,
            }
        }
        if dims.c == 0 || dims.n_a == 0 || dims.n_c == 0 {
            return Err(Error::Config(format!(
                "{META_FILE}: C, N_a and N_c are required"
            )));
        }
        let mut model = DppnModel::init(hyper, dims, &Tensor::zeros(&[dims.n_a, dims.n_c]))?;
        for (name, slot) in model.named_tensors_mut() {
            let t = load_tensor(dir.join(format!("{name}.dtf")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Shape {
                    op: "checkpoint load",
                    lhs: slot.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            *slot = t;
        }
        Ok(Self { model, epoch })
    }
}
