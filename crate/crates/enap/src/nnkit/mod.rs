//! Minimal differentiable-network primitives with hand-derived gradients:
//! a tanh Elman recurrence, feedforward nets with rectifier hiddens, and an
//! adaptive-moment optimizer. Nets here are tiny; every gradient is certified
//! against central finite differences in the test suite.

mod checkpoint;
mod mlp;
mod optim;
mod rnn;

pub use checkpoint::{Checkpoint, CheckpointError, Tensor};
pub use mlp::{mlp_loss_and_grads_mse, Linear, MlpForward, MlpParams};
pub use optim::{optimizer_step, OptimizerState};
pub use rnn::{rnn_forward, rnn_loss_and_grads, RnnForward, RnnParams, RnnSequence};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got} ({context})")]
    ShapeMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("loss is not finite")]
    NonFiniteLoss,
}

pub(crate) fn outer_add(acc: &mut [Vec<f64>], dy: &[f64], x: &[f64]) {
    for (row, &d) in acc.iter_mut().zip(dy) {
        for (cell, &v) in row.iter_mut().zip(x) {
            *cell += d * v;
        }
    }
}

pub(crate) fn matvec(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub(crate) fn matvec_t(w: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    if w.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; w[0].len()];
    for (row, &d) in w.iter().zip(y) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += d * v;
        }
    }
    out
}
