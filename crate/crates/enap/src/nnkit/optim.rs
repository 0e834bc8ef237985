use serde::{Deserialize, Serialize};

use super::NnError;

/// Gradient-descent state: plain SGD, or first/second-moment scaling when
/// `adaptive` is set (the default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub adaptive: bool,
    pub step: usize,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(lr: f64, n_params: usize) -> Self {
        OptimizerState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            adaptive: true,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn sgd(lr: f64, n_params: usize) -> Self {
        OptimizerState {
            adaptive: false,
            ..Self::new(lr, n_params)
        }
    }
}

/// One update of `params` in place. Deterministic given the state.
pub fn optimizer_step(
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
) -> Result<(), NnError> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(NnError::ShapeMismatch {
            expected: state.m.len(),
            got: params.len().max(grads.len()),
            context: "optimizer parameter count",
        });
    }
    state.step += 1;
    if !state.adaptive {
        for (p, &g) in params.iter_mut().zip(grads) {
            *p -= state.lr * g;
        }
        return Ok(());
    }
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}
