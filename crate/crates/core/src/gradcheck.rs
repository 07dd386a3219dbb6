//! Central finite-difference check of [`Graph::backward`].

use std::collections::BTreeMap;

use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::model::{total_loss, DppnModel, ForwardCtx};
use crate::tensor::Tensor;

/// Gradients smaller than this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Worst element-wise relative error between the backward gradient of `f`
/// at `at` and central differences with step `h`.
///
/// `f` builds a scalar from the single trainable leaf it is handed.
pub fn finite_diff_check<F>(f: F, at: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    assert!(h > 0.0, "step must be positive");
    let mut g = Graph::new();
    let x = g.param(at.clone());
    let y = f(&mut g, x)?;
    let analytic = g.backward(y)?.get(x);

    let eval = |t: Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.param(t);
        let y = f(&mut g, x)?;
        Ok(g.value(y).item())
    };

    let mut worst = 0.0f64;
    for i in 0..at.len() {
        let mut plus = at.clone();
        plus.data_mut()[i] += h;
        let mut minus = at.clone();
        minus.data_mut()[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

/// One training example for [`model_gradient_check`].
pub struct Example<'a> {
    pub features: &'a Tensor,
    /// Index into the seen classes.
    pub seen_index: usize,
    pub attributes: &'a Tensor,
}

/// Worst relative error per trainable parameter tensor of the model's
/// per-sample objective, against central differences with step `h`.
pub fn model_gradient_check(
    model: &DppnModel,
    seen_attributes: &Tensor,
    example: &Example<'_>,
    h: f64,
) -> Result<BTreeMap<String, f64>> {
    let loss = |m: &DppnModel| -> Result<(f64, BTreeMap<String, Tensor>)> {
        let mut g = Graph::new();
        let ctx = ForwardCtx::new(&mut g, m, seen_attributes)?;
        let terms = total_loss(
            &mut g,
            &ctx,
            &m.hyper,
            example.features,
            example.seen_index,
            example.attributes,
        )?;
        let grads = g.backward(terms.total)?;
        let by_name = ctx
            .vars
            .by_name
            .iter()
            .map(|(n, &v)| (n.clone(), grads.get(v)))
            .collect();
        Ok((g.value(terms.total).item(), by_name))
    };
    let (_, analytic) = loss(model)?;
    let frozen = model.frozen_names();
    let mut out = BTreeMap::new();
    for (name, grad) in analytic
        .iter()
        .filter(|(n, _)| !frozen.contains(&n.as_str()))
    {
        let mut worst = 0.0f64;
        for i in 0..grad.len() {
            let shifted = |delta: f64| -> Result<f64> {
                let mut m = model.clone();
                for (n, t) in m.named_tensors_mut() {
                    if n == *name {
                        t.data_mut()[i] += delta;
                    }
                }
                Ok(loss(&m)?.0)
            };
            let numeric = (shifted(h)? - shifted(-h)?) / (2.0 * h);
            worst = worst.max(relative_error(grad.data()[i], numeric));
        }
        out.insert(name.clone(), worst);
    }
    Ok(out)
}
