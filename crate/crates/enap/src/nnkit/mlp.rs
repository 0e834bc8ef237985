use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{matvec, matvec_t, outer_add, NnError};

/// A dense layer, weight is out×in row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            weight: vec![vec![0.0; input]; output],
            bias: vec![0.0; output],
        }
    }

    pub fn seeded(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = 1.0 / (input.max(1) as f64).sqrt();
        Linear {
            weight: (0..output)
                .map(|_| (0..input).map(|_| rng.gen_range(-scale..scale)).collect())
                .collect(),
            bias: vec![0.0; output],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = matvec(&self.weight, x);
        for (v, b) in y.iter_mut().zip(&self.bias) {
            *v += b;
        }
        y
    }
}

/// Feedforward net: rectifier on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Linear>,
}

/// Intermediate activations kept for the backward pass. `inputs[l]` is the
/// input to layer l; `inputs.last()` is the network output.
pub struct MlpForward {
    pub inputs: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl MlpParams {
    /// `dims` = [input, hidden..., output].
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        MlpParams {
            layers: dims
                .windows(2)
                .map(|w| Linear::zeros(w[0], w[1]))
                .collect(),
        }
    }

    pub fn seeded(dims: &[usize], seed: u64) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MlpParams {
            layers: dims
                .windows(2)
                .map(|w| Linear::seeded(w[0], w[1], &mut rng))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.weight[0].len()).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.bias.len()).unwrap_or(0)
    }

    pub fn forward(&self, x: &[f64]) -> MlpForward {
        let mut inputs = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = layer.apply(inputs.last().unwrap());
            if l != last {
                for v in y.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            inputs.push(y);
        }
        let output = inputs.last().unwrap().clone();
        MlpForward { inputs, output }
    }

    /// Backpropagates `d_output` through the stored forward pass; returns
    /// parameter gradients (same shapes as the params) and the input gradient.
    pub fn backward(&self, fwd: &MlpForward, d_output: &[f64]) -> (MlpParams, Vec<f64>) {
        let mut grads = MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.weight[0].len(), l.bias.len()))
                .collect(),
        };
        let mut delta = d_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            // Rectifier derivative for hidden layers (output layer is linear).
            if l != self.layers.len() - 1 {
                for (d, y) in delta.iter_mut().zip(&fwd.inputs[l + 1]) {
                    if *y <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            outer_add(&mut grads.layers[l].weight, &delta, &fwd.inputs[l]);
            for (b, &d) in grads.layers[l].bias.iter_mut().zip(&delta) {
                *b += d;
            }
            delta = matvec_t(&self.layers[l].weight, &delta);
        }
        (grads, delta)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            for row in &l.weight {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for l in self.layers.iter_mut() {
            for row in l.weight.iter_mut() {
                for v in row.iter_mut() {
                    *v = *it.next().expect("flat params long enough");
                }
            }
            for v in l.bias.iter_mut() {
                *v = *it.next().expect("flat params long enough");
            }
        }
        assert!(it.next().is_none(), "flat params too long");
    }

    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (ra, rb) in a.weight.iter_mut().zip(&b.weight) {
                for (va, vb) in ra.iter_mut().zip(rb) {
                    *va += scale * vb;
                }
            }
            for (va, vb) in a.bias.iter_mut().zip(&b.bias) {
                *va += scale * vb;
            }
        }
    }
}

/// Mean squared error loss over a batch of (input, target) pairs, with
/// gradients for every parameter.
pub fn mlp_loss_and_grads_mse(
    p: &MlpParams,
    batch: &[(Vec<f64>, Vec<f64>)],
) -> Result<(f64, MlpParams), NnError> {
    if batch.is_empty() {
        return Err(NnError::ShapeMismatch {
            expected: 1,
            got: 0,
            context: "empty batch",
        });
    }
    let mut grads = MlpParams::zeros_like(p);
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for (x, target) in batch {
        if target.len() != p.output_dim() {
            return Err(NnError::ShapeMismatch {
                expected: p.output_dim(),
                got: target.len(),
                context: "mse target",
            });
        }
        let fwd = p.forward(x);
        let mut d_out = vec![0.0; target.len()];
        for ((d, y), t) in d_out.iter_mut().zip(&fwd.output).zip(target) {
            let e = y - t;
            loss += e * e * scale;
            *d = 2.0 * e * scale;
        }
        let (g, _) = p.backward(&fwd, &d_out);
        grads.add_scaled(&g, 1.0);
    }
    if !loss.is_finite() {
        return Err(NnError::NonFiniteLoss);
    }
    Ok((loss, grads))
}

impl MlpParams {
    pub fn zeros_like(p: &MlpParams) -> MlpParams {
        MlpParams {
            layers: p
                .layers
                .iter()
                .map(|l| Linear::zeros(l.weight[0].len(), l.bias.len()))
                .collect(),
        }
    }

    pub fn to_checkpoint(&self) -> super::Checkpoint {
        let mut ck = super::Checkpoint::default();
        ck.meta
            .insert("layers".into(), self.layers.len().to_string());
        for (i, l) in self.layers.iter().enumerate() {
            ck.tensors
                .push(super::Tensor::matrix(&format!("layer{i}_w"), &l.weight));
            ck.tensors
                .push(super::Tensor::vector(&format!("layer{i}_b"), l.bias.clone()));
        }
        ck
    }

    pub fn from_checkpoint(ck: &super::Checkpoint) -> Result<Self, super::CheckpointError> {
        let n: usize = ck
            .meta_field("layers")?
            .parse()
            .map_err(|_| super::CheckpointError::MissingMeta("layers".into()))?;
        let mut layers = Vec::with_capacity(n);
        for i in 0..n {
            layers.push(Linear {
                weight: ck.tensor(&format!("layer{i}_w"))?.to_matrix(),
                bias: ck.tensor(&format!("layer{i}_b"))?.data.clone(),
            });
        }
        Ok(MlpParams { layers })
    }
}
