//! Adam with bias correction.

use super::{DenseNetwork, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    /// Moments start at zero, shaped like the network's parameters.
    pub fn new(net: &DenseNetwork, learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        AdamState {
            step: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon: 1e-8,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// Defaults used throughout training: lr 2e-4, beta1 0.5, beta2 0.999.
    pub fn with_defaults(net: &DenseNetwork) -> Self {
        Self::new(net, 2e-4, 0.5, 0.999)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update. Parameters are mutated in place; the step counter
/// increments by exactly one.
pub fn adam_step(state: &mut AdamState, net: &mut DenseNetwork, grads: &Gradients) -> Result<()> {
    if !grads.matches(net) || !state.m.matches(net) {
        return Err(Error::Contract("gradient/state shapes do not match parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = state.beta1;
    let b2 = state.beta2;
    let corr1 = 1.0 - b1.powi(t);
    let corr2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;

    let update = |p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };

    for l in 0..net.num_layers() {
        update(
            net.weights[l].data_mut(),
            state.m.weights[l].data_mut(),
            state.v.weights[l].data_mut(),
            grads.weights[l].data(),
        );
        update(
            &mut net.biases[l],
            &mut state.m.biases[l],
            &mut state.v.biases[l],
            &grads.biases[l],
        );
    }
    Ok(())
}
