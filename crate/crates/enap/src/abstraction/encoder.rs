use serde::{Deserialize, Serialize};

use super::AbstractionError;
use crate::core::Dataset;
use crate::nnkit::MlpParams;

/// Feature encoder φ mapping observations to feature vectors. The identity
/// variant passes observations through untouched; the Mlp variant is a small
/// trainable feedforward net (the policy-discovery scenario).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncoderParams {
    Identity { dim: usize },
    Mlp(MlpParams),
}

impl EncoderParams {
    pub fn identity(dim: usize) -> Self {
        EncoderParams::Identity { dim }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            EncoderParams::Identity { dim } => *dim,
            EncoderParams::Mlp(mlp) => mlp.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            EncoderParams::Identity { dim } => *dim,
            EncoderParams::Mlp(mlp) => mlp.output_dim(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, EncoderParams::Identity { .. })
    }
}

/// Encodes one observation.
pub fn encode_observation(enc: &EncoderParams, obs: &[f64]) -> Result<Vec<f64>, AbstractionError> {
    if obs.len() != enc.input_dim() {
        return Err(AbstractionError::DimensionMismatch {
            expected: enc.input_dim(),
            got: obs.len(),
        });
    }
    Ok(match enc {
        EncoderParams::Identity { .. } => obs.to_vec(),
        EncoderParams::Mlp(mlp) => mlp.forward(obs).output,
    })
}

/// Encodes every step of the dataset, one feature per step, in trajectory
/// order then step order.
pub fn encode_dataset(enc: &EncoderParams, ds: &Dataset) -> Result<Vec<Vec<f64>>, AbstractionError> {
    if enc.input_dim() != ds.obs_dim {
        return Err(AbstractionError::DimensionMismatch {
            expected: enc.input_dim(),
            got: ds.obs_dim,
        });
    }
    let mut features = Vec::with_capacity(ds.step_count());
    for traj in &ds.trajectories {
        for step in &traj.steps {
            features.push(encode_observation(enc, &step.obs)?);
        }
    }
    Ok(features)
}
