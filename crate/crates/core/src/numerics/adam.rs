use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Moment accumulators and hyperparameters for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected ADAM update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len()
    {
        return Err(Error::Dimension {
            op: "adam_step",
            left: (params.len(), 1),
            right: (grads.len(), state.m.len()),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let step_size = state.lr / c1;
    let c2_sqrt = c2.sqrt();

    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        // Moments of parameters with vanishing gradients decay geometrically;
        // flush them before they turn subnormal.
        if m.abs() < f64::MIN_POSITIVE {
            *m = 0.0;
        }
        if *v < f64::MIN_POSITIVE {
            *v = 0.0;
        }
        // lr * m_hat / (sqrt(v_hat) + eps), same arrangement as PyTorch.
        let denom = v.sqrt() / c2_sqrt + state.epsilon;
        *p -= step_size * *m / denom;
    }
    Ok(())
}
