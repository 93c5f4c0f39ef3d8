//! Adam with bias correction, operating on a whole `DenseNet` at once.

use super::{DenseNet, NetError, NetGrads};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamParams {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamParams { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates, shaped like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: NetGrads,
    pub v: NetGrads,
    pub t: u64,
}

impl AdamState {
    pub fn new(net: &DenseNet) -> Self {
        AdamState { m: NetGrads::zeros_like(net), v: NetGrads::zeros_like(net), t: 0 }
    }
}

pub fn adam_step(
    net: &mut DenseNet,
    grads: &NetGrads,
    state: &mut AdamState,
    params: &AdamParams,
) -> Result<(), NetError> {
    if grads.layers.len() != net.layers.len()
        || grads
            .layers
            .iter()
            .zip(net.layers.iter())
            .any(|(g, l)| g.d_weights.len() != l.weights.len() || g.d_bias.len() != l.bias.len())
    {
        return Err(NetError::GradShape);
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - params.beta1.powi(t);
    let bc2 = 1.0 - params.beta2.powi(t);

    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = params.beta1 * *m + (1.0 - params.beta1) * g;
        *v = params.beta2 * *v + (1.0 - params.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= params.learning_rate * m_hat / (v_hat.sqrt() + params.epsilon);
    };

    for (li, layer) in net.layers.iter_mut().enumerate() {
        let g = &grads.layers[li];
        let m = &mut state.m.layers[li];
        let v = &mut state.v.layers[li];
        for i in 0..layer.weights.len() {
            update(&mut layer.weights[i], g.d_weights[i], &mut m.d_weights[i], &mut v.d_weights[i]);
        }
        for i in 0..layer.bias.len() {
            update(&mut layer.bias[i], g.d_bias[i], &mut m.d_bias[i], &mut v.d_bias[i]);
        }
    }
    Ok(())
}
