use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-parameter Adam state with bias-corrected moments.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shape: &[usize], lr: f64) -> Self {
        Self {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of `param` in place.
///
/// An all-zero gradient leaves the parameter bit-identical: the moment
/// estimates stay exactly zero, so the update term is `0 / (0 + ε) = 0`.
pub fn adam_step(param: &mut Tensor, grad: &Tensor, state: &mut AdamState) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(Error::Shape {
            op: "adam_step",
            lhs: param.shape().to_vec(),
            rhs: grad.shape().to_vec(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2) = (state.beta1, state.beta2);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (i, (p, &g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        let delta = state.lr * m_hat / (v_hat.sqrt() + state.eps);
        if delta != 0.0 {
            *p -= delta;
        }
    }
    Ok(())
}
