use serde::{Deserialize, Serialize};

use crate::neural::network::NeuralParameters;
use crate::tensor::Matrix;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one pair per trainable tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl AdamState {
    pub fn new(params: &NeuralParameters) -> Self {
        let zeros: Vec<Matrix> = params
            .tensors()
            .iter()
            .map(|(_, t)| Matrix::zeros(t.rows(), t.cols()))
            .collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update of every trainable tensor.
pub fn adam_step(params: &mut NeuralParameters, grads: &NeuralParameters, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let grads = grads.tensors();
    for (((p, (_, g)), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((w, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}
