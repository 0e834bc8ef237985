use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{matvec, matvec_t, outer_add, Linear, NnError};
use crate::core::SymbolId;

/// Elman recurrence with tanh hiddens plus the two auxiliary prediction heads
/// used during training (next action, next symbol). Symbols enter through a
/// learnable embedding table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnParams {
    pub w_h: Vec<Vec<f64>>,
    pub w_x: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub sym_embed: Vec<Vec<f64>>,
    pub head_act: Linear,
    pub head_state: Linear,
}

impl RnnParams {
    pub fn hidden_dim(&self) -> usize {
        self.b.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn embed_dim(&self) -> usize {
        self.sym_embed.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn action_dim(&self) -> usize {
        self.input_dim() - self.embed_dim()
    }

    pub fn alphabet_size(&self) -> usize {
        self.sym_embed.len()
    }

    pub fn zeros(hidden: usize, action_dim: usize, embed_dim: usize, alphabet: usize) -> Self {
        RnnParams {
            w_h: vec![vec![0.0; hidden]; hidden],
            w_x: vec![vec![0.0; action_dim + embed_dim]; hidden],
            b: vec![0.0; hidden],
            sym_embed: vec![vec![0.0; embed_dim]; alphabet],
            head_act: Linear::zeros(hidden, action_dim),
            head_state: Linear::zeros(hidden, alphabet),
        }
    }

    pub fn seeded(
        hidden: usize,
        action_dim: usize,
        embed_dim: usize,
        alphabet: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(hidden, action_dim, embed_dim, alphabet);
        let init = |rows: &mut Vec<Vec<f64>>, fan_in: usize, rng: &mut ChaCha8Rng| {
            let scale = 1.0 / (fan_in.max(1) as f64).sqrt();
            for row in rows.iter_mut() {
                for v in row.iter_mut() {
                    *v = rand::Rng::gen_range(rng, -scale..scale);
                }
            }
        };
        init(&mut p.w_h, hidden, &mut rng);
        init(&mut p.w_x, action_dim + embed_dim, &mut rng);
        init(&mut p.sym_embed, embed_dim, &mut rng);
        p.head_act = Linear::seeded(hidden, action_dim, &mut rng);
        p.head_state = Linear::seeded(hidden, alphabet, &mut rng);
        p
    }

    /// Concatenated (action, symbol-embedding) input for one step.
    pub fn step_input(&self, action: &[f64], symbol: SymbolId) -> Vec<f64> {
        let mut x = action.to_vec();
        x.extend_from_slice(&self.sym_embed[symbol]);
        x
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for row in self.w_h.iter().chain(&self.w_x).chain(&self.sym_embed) {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.b);
        for l in [&self.head_act, &self.head_state] {
            for row in &l.weight {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        let fill_rows = |rows: &mut Vec<Vec<f64>>, it: &mut std::slice::Iter<f64>| {
            for row in rows.iter_mut() {
                for v in row.iter_mut() {
                    *v = *it.next().expect("flat long enough");
                }
            }
        };
        fill_rows(&mut self.w_h, &mut it);
        fill_rows(&mut self.w_x, &mut it);
        fill_rows(&mut self.sym_embed, &mut it);
        for v in self.b.iter_mut() {
            *v = *it.next().expect("flat long enough");
        }
        for l in [&mut self.head_act, &mut self.head_state] {
            for row in l.weight.iter_mut() {
                for v in row.iter_mut() {
                    *v = *it.next().expect("flat long enough");
                }
            }
            for v in l.bias.iter_mut() {
                *v = *it.next().expect("flat long enough");
            }
        }
        assert!(it.next().is_none(), "flat params too long");
    }

    pub fn zeros_like(&self) -> RnnParams {
        RnnParams::zeros(
            self.hidden_dim(),
            self.action_dim(),
            self.embed_dim(),
            self.alphabet_size(),
        )
    }
}

pub struct RnnForward {
    /// h_1..h_T, one per consumed input.
    pub hiddens: Vec<Vec<f64>>,
    pub act_preds: Vec<Vec<f64>>,
    pub state_logits: Vec<Vec<f64>>,
}

/// Runs the recurrence over pre-built input vectors. h_0 = 0;
/// h_t = tanh(W_h h_{t-1} + W_x x_t + b). Heads are applied at every step.
pub fn rnn_forward(p: &RnnParams, xs: &[Vec<f64>]) -> Result<RnnForward, NnError> {
    if xs.is_empty() {
        return Err(NnError::ShapeMismatch {
            expected: 1,
            got: 0,
            context: "rnn input length",
        });
    }
    for x in xs {
        if x.len() != p.input_dim() {
            return Err(NnError::ShapeMismatch {
                expected: p.input_dim(),
                got: x.len(),
                context: "rnn step input",
            });
        }
    }
    let mut h = vec![0.0; p.hidden_dim()];
    let mut hiddens = Vec::with_capacity(xs.len());
    let mut act_preds = Vec::with_capacity(xs.len());
    let mut state_logits = Vec::with_capacity(xs.len());
    for x in xs {
        let mut z = matvec(&p.w_h, &h);
        let zx = matvec(&p.w_x, x);
        for ((zi, xi), bi) in z.iter_mut().zip(zx).zip(&p.b) {
            *zi += xi + bi;
        }
        h = z.into_iter().map(f64::tanh).collect();
        act_preds.push(p.head_act.apply(&h));
        state_logits.push(p.head_state.apply(&h));
        hiddens.push(h.clone());
    }
    Ok(RnnForward {
        hiddens,
        act_preds,
        state_logits,
    })
}

/// One training sequence: the annotated steps of a trajectory.
#[derive(Debug, Clone)]
pub struct RnnSequence {
    pub actions: Vec<Vec<f64>>,
    pub symbols: Vec<SymbolId>,
}

impl RnnSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

const NORM_GUARD: f64 = 1e-9;

/// Multi-objective sequence loss: mean squared error on the next action,
/// cross-entropy on the next symbol, and a phase-aware contrastive term that
/// pulls consecutive hiddens together inside a constant-symbol run and pushes
/// them apart across symbol changes. Returns the loss and gradients for every
/// parameter, including the symbol embedding table.
pub fn rnn_loss_and_grads(
    p: &RnnParams,
    batch: &[RnnSequence],
    lambda_contrast: f64,
) -> Result<(f64, RnnParams), NnError> {
    let pairs: usize = batch.iter().map(|s| s.len().saturating_sub(1)).sum();
    if pairs == 0 {
        return Err(NnError::ShapeMismatch {
            expected: 2,
            got: batch.iter().map(|s| s.len()).max().unwrap_or(0),
            context: "need at least one (step, next step) pair",
        });
    }
    let scale = 1.0 / pairs as f64;
    let mut loss = 0.0;
    let mut grads = p.zeros_like();

    for seq in batch.iter().filter(|s| s.len() >= 2) {
        let t_len = seq.len();
        let xs: Vec<Vec<f64>> = (0..t_len)
            .map(|t| p.step_input(&seq.actions[t], seq.symbols[t]))
            .collect();
        let fwd = rnn_forward(p, &xs)?;

        // Per-step hidden gradients, filled by heads and contrast, then
        // back-propagated through time below.
        let mut d_h: Vec<Vec<f64>> = vec![vec![0.0; p.hidden_dim()]; t_len];

        for t in 0..t_len - 1 {
            // Action head: MSE against the next action.
            let target_a = &seq.actions[t + 1];
            let mut d_act = vec![0.0; target_a.len()];
            for ((d, y), tv) in d_act.iter_mut().zip(&fwd.act_preds[t]).zip(target_a) {
                let e = y - tv;
                loss += e * e * scale;
                *d = 2.0 * e * scale;
            }
            outer_add(&mut grads.head_act.weight, &d_act, &fwd.hiddens[t]);
            for (b, &d) in grads.head_act.bias.iter_mut().zip(&d_act) {
                *b += d;
            }
            add_into(&mut d_h[t], &matvec_t(&p.head_act.weight, &d_act));

            // State head: cross-entropy against the next symbol.
            let target_c = seq.symbols[t + 1];
            let probs = softmax(&fwd.state_logits[t]);
            loss -= probs[target_c].max(1e-300).ln() * scale;
            let mut d_logits = probs;
            d_logits[target_c] -= 1.0;
            for d in d_logits.iter_mut() {
                *d *= scale;
            }
            outer_add(&mut grads.head_state.weight, &d_logits, &fwd.hiddens[t]);
            for (b, &d) in grads.head_state.bias.iter_mut().zip(&d_logits) {
                *b += d;
            }
            add_into(&mut d_h[t], &matvec_t(&p.head_state.weight, &d_logits));

            // Phase-aware contrast on (h_t, h_{t+1}).
            if lambda_contrast != 0.0 {
                let (u, v) = (&fwd.hiddens[t], &fwd.hiddens[t + 1]);
                let nu = norm(u);
                let nv = norm(v);
                if nu > NORM_GUARD && nv > NORM_GUARD {
                    let cos = dot(u, v) / (nu * nv);
                    let sign = if seq.symbols[t] == seq.symbols[t + 1] {
                        loss += lambda_contrast * (1.0 - cos) * scale;
                        -1.0
                    } else {
                        loss += lambda_contrast * cos * scale;
                        1.0
                    };
                    let w = sign * lambda_contrast * scale;
                    for i in 0..u.len() {
                        d_h[t][i] += w * (v[i] / (nu * nv) - cos * u[i] / (nu * nu));
                        d_h[t + 1][i] += w * (u[i] / (nu * nv) - cos * v[i] / (nv * nv));
                    }
                }
            }
        }

        // Backpropagation through time.
        let mut carry = vec![0.0; p.hidden_dim()];
        for t in (0..t_len).rev() {
            let mut dh = d_h[t].clone();
            add_into(&mut dh, &carry);
            let h = &fwd.hiddens[t];
            let dz: Vec<f64> = dh
                .iter()
                .zip(h)
                .map(|(d, hv)| d * (1.0 - hv * hv))
                .collect();
            if t > 0 {
                outer_add(&mut grads.w_h, &dz, &fwd.hiddens[t - 1]);
            }
            outer_add(&mut grads.w_x, &dz, &xs[t]);
            for (b, &d) in grads.b.iter_mut().zip(&dz) {
                *b += d;
            }
            let dx = matvec_t(&p.w_x, &dz);
            let a_dim = p.action_dim();
            for (g, &d) in grads.sym_embed[seq.symbols[t]]
                .iter_mut()
                .zip(&dx[a_dim..])
            {
                *g += d;
            }
            carry = matvec_t(&p.w_h, &dz);
        }
    }

    if !loss.is_finite() {
        return Err(NnError::NonFiniteLoss);
    }
    Ok((loss, grads))
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn add_into(acc: &mut [f64], other: &[f64]) {
    for (a, &o) in acc.iter_mut().zip(other) {
        *a += o;
    }
}
