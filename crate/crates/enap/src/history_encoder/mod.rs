//! The history encoder maps variable-length (action, symbol) prefixes to
//! fixed-size unit embeddings. Three modes:
//!
//! - `TrainedRnn`: tanh recurrence trained with the multi-objective loss
//!   (next-action MSE, next-symbol cross-entropy, phase-aware contrast).
//! - `RandomRnn`: the same recurrence at random initialization.
//! - `ExactHistory`: a hash of the quantized prefix mapped to a pseudo-random
//!   unit vector, so embeddings are equal iff the prefixes are equal. This is
//!   the deterministic path for discrete domains.
//!
//! Also houses the saturation diagnostics that justify using cosine
//! similarity as a state-identity test for near-saturated tanh hiddens.

mod saturation;

pub use saturation::{saturation_bound, saturation_report, SaturationBound, SaturationReport};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::core::{normalize_in_place, Dataset, SymbolId};
use crate::nnkit::{
    optimizer_step, rnn_forward, rnn_loss_and_grads, Checkpoint, NnError, OptimizerState,
    RnnParams, RnnSequence, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderMode {
    ExactHistory,
    RandomRnn,
    TrainedRnn,
}

impl EncoderMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EncoderMode::ExactHistory => "exact",
            EncoderMode::RandomRnn => "random-rnn",
            EncoderMode::TrainedRnn => "trained-rnn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(EncoderMode::ExactHistory),
            "random-rnn" => Some(EncoderMode::RandomRnn),
            "trained-rnn" => Some(EncoderMode::TrainedRnn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEncoder {
    pub mode: EncoderMode,
    pub rnn: Option<RnnParams>,
    pub embed_dim: usize,
    pub normalize_output: bool,
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("empty prefix")]
    EmptyPrefix,
    #[error("dataset has no usable sequences")]
    EmptyDataset,
    #[error("dataset is not fully symbol-annotated")]
    NotAnnotated,
    #[error("symbol {0} out of range for this encoder")]
    SymbolOutOfRange(SymbolId),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Actions are rounded to six decimals before hashing in exact mode.
const ACTION_QUANT: f64 = 1e6;

impl HistoryEncoder {
    pub fn exact(embed_dim: usize) -> Self {
        HistoryEncoder {
            mode: EncoderMode::ExactHistory,
            rnn: None,
            embed_dim,
            normalize_output: true,
        }
    }

    pub fn random_rnn(
        hidden_dim: usize,
        action_dim: usize,
        sym_embed_dim: usize,
        alphabet: usize,
        seed: u64,
    ) -> Self {
        HistoryEncoder {
            mode: EncoderMode::RandomRnn,
            rnn: Some(RnnParams::seeded(
                hidden_dim,
                action_dim,
                sym_embed_dim,
                alphabet,
                seed,
            )),
            embed_dim: hidden_dim,
            normalize_output: true,
        }
    }

    /// Embedding that stands for the empty history; the root of every
    /// embedded database. A fixed unit vector per (mode, dim).
    pub fn root_embedding(&self) -> Vec<f64> {
        hash_unit_vector(b"empty-history", self.embed_dim)
    }
}

/// Embeds a non-empty (action, symbol) prefix.
pub fn embed_history(
    enc: &HistoryEncoder,
    prefix: &[(Vec<f64>, SymbolId)],
) -> Result<Vec<f64>, HistoryError> {
    if prefix.is_empty() {
        return Err(HistoryError::EmptyPrefix);
    }
    match enc.mode {
        EncoderMode::ExactHistory => {
            let mut hasher = Sha256::new();
            hasher.update((prefix.len() as u64).to_le_bytes());
            for (action, symbol) in prefix {
                hasher.update((*symbol as u64).to_le_bytes());
                hasher.update((action.len() as u64).to_le_bytes());
                for &a in action {
                    let q = (a * ACTION_QUANT).round() as i64;
                    hasher.update(q.to_le_bytes());
                }
            }
            Ok(unit_vector_from_digest(&hasher.finalize(), enc.embed_dim))
        }
        EncoderMode::RandomRnn | EncoderMode::TrainedRnn => {
            let rnn = enc.rnn.as_ref().expect("rnn modes carry parameters");
            for (_, c) in prefix {
                if *c >= rnn.alphabet_size() {
                    return Err(HistoryError::SymbolOutOfRange(*c));
                }
            }
            let xs: Vec<Vec<f64>> = prefix
                .iter()
                .map(|(a, c)| rnn.step_input(a, *c))
                .collect();
            let fwd = rnn_forward(rnn, &xs)?;
            let mut h = fwd.hiddens.last().expect("non-empty prefix").clone();
            if enc.normalize_output && !normalize_in_place(&mut h) {
                // A genuinely zero hidden state cannot be normalized; fall
                // back to the raw zeros rather than fabricate a direction.
            }
            Ok(h)
        }
    }
}

fn unit_vector_from_digest(digest: &[u8], dim: usize) -> Vec<f64> {
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest[..32]);
    let mut rng = ChaCha8Rng::from_seed(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
    if !normalize_in_place(&mut v) {
        v = vec![0.0; dim];
        v[0] = 1.0;
    }
    v
}

fn hash_unit_vector(tag: &[u8], dim: usize) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(tag);
    unit_vector_from_digest(&hasher.finalize(), dim)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub sym_embed_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub lambda_contrast: f64,
    pub seed: u64,
    pub normalize_output: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 64,
            sym_embed_dim: 16,
            epochs: 30,
            lr: 1e-3,
            lambda_contrast: 0.5,
            seed: 0,
            normalize_output: true,
        }
    }
}

/// Trains the recurrent history encoder on a fully annotated dataset. The
/// prediction heads are used during training and ignored afterwards (the
/// embedding is the hidden state alone). Returns the encoder and the loss
/// curve: entry 0 is the loss at initialization, entry e the full-batch loss
/// after epoch e.
pub fn train_history_encoder(
    ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<(HistoryEncoder, Vec<f64>), HistoryError> {
    if !ds.is_annotated() {
        return Err(HistoryError::NotAnnotated);
    }
    let alphabet = ds.alphabet_size().ok_or(HistoryError::EmptyDataset)?;
    let sequences: Vec<RnnSequence> = ds
        .trajectories
        .iter()
        .map(|t| RnnSequence {
            actions: t.steps.iter().map(|s| s.action.clone()).collect(),
            symbols: t.steps.iter().map(|s| s.symbol.unwrap()).collect(),
        })
        .filter(|s| s.len() >= 2)
        .collect();
    if sequences.is_empty() {
        return Err(HistoryError::EmptyDataset);
    }

    let mut rnn = RnnParams::seeded(
        cfg.hidden_dim,
        ds.action_dim,
        cfg.sym_embed_dim,
        alphabet,
        cfg.seed,
    );
    let mut curve = Vec::with_capacity(cfg.epochs + 1);
    let (init_loss, _) = rnn_loss_and_grads(&rnn, &sequences, cfg.lambda_contrast)?;
    curve.push(init_loss);

    let mut opt = OptimizerState::new(cfg.lr, rnn.flatten().len());
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e3779b97f4a7c15));
    for _ in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        for &i in &order {
            let (_, grads) =
                rnn_loss_and_grads(&rnn, std::slice::from_ref(&sequences[i]), cfg.lambda_contrast)?;
            let mut flat = rnn.flatten();
            optimizer_step(&mut opt, &mut flat, &grads.flatten())?;
            rnn.assign_from_flat(&flat);
        }
        let (epoch_loss, _) = rnn_loss_and_grads(&rnn, &sequences, cfg.lambda_contrast)?;
        curve.push(epoch_loss);
    }

    Ok((
        HistoryEncoder {
            mode: EncoderMode::TrainedRnn,
            rnn: Some(rnn),
            embed_dim: cfg.hidden_dim,
            normalize_output: cfg.normalize_output,
        },
        curve,
    ))
}

impl HistoryEncoder {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.meta.insert("mode".into(), self.mode.as_str().into());
        ck.meta
            .insert("normalize_output".into(), self.normalize_output.to_string());
        ck.meta.insert("embed_dim".into(), self.embed_dim.to_string());
        if let Some(rnn) = &self.rnn {
            ck.tensors.push(Tensor::matrix("w_h", &rnn.w_h));
            ck.tensors.push(Tensor::matrix("w_x", &rnn.w_x));
            ck.tensors.push(Tensor::vector("b", rnn.b.clone()));
            ck.tensors.push(Tensor::matrix("sym_embed", &rnn.sym_embed));
            ck.tensors
                .push(Tensor::matrix("head_act_w", &rnn.head_act.weight));
            ck.tensors
                .push(Tensor::vector("head_act_b", rnn.head_act.bias.clone()));
            ck.tensors
                .push(Tensor::matrix("head_state_w", &rnn.head_state.weight));
            ck.tensors
                .push(Tensor::vector("head_state_b", rnn.head_state.bias.clone()));
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, crate::nnkit::CheckpointError> {
        let mode = EncoderMode::parse(ck.meta_field("mode")?)
            .ok_or_else(|| crate::nnkit::CheckpointError::MissingMeta("mode".into()))?;
        let normalize_output = ck.meta_field("normalize_output")? == "true";
        let embed_dim: usize = ck
            .meta_field("embed_dim")?
            .parse()
            .map_err(|_| crate::nnkit::CheckpointError::MissingMeta("embed_dim".into()))?;
        let rnn = if mode == EncoderMode::ExactHistory {
            None
        } else {
            Some(RnnParams {
                w_h: ck.tensor("w_h")?.to_matrix(),
                w_x: ck.tensor("w_x")?.to_matrix(),
                b: ck.tensor("b")?.data.clone(),
                sym_embed: ck.tensor("sym_embed")?.to_matrix(),
                head_act: crate::nnkit::Linear {
                    weight: ck.tensor("head_act_w")?.to_matrix(),
                    bias: ck.tensor("head_act_b")?.data.clone(),
                },
                head_state: crate::nnkit::Linear {
                    weight: ck.tensor("head_state_w")?.to_matrix(),
                    bias: ck.tensor("head_state_b")?.data.clone(),
                },
            })
        };
        Ok(HistoryEncoder {
            mode,
            rnn,
            embed_dim,
            normalize_output,
        })
    }
}
