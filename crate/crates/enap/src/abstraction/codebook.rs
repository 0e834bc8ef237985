use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{encode_observation, AbstractionError, EncoderParams};
use crate::core::{euclidean, Dataset, SymbolId};

/// The discrete alphabet: one centroid per symbol, in symbol-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
    pub min_cluster_size: usize,
    pub refined: bool,
}

impl Codebook {
    pub fn alphabet_size(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut s = serde_json::to_string(self).expect("codebook serializes");
        s.push('\n');
        fs::write(path, s)
    }

    pub fn load(path: &Path) -> Result<Self, Box<dyn std::error::Error>> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Nearest-centroid assignment by Euclidean distance; ties break toward the
/// smallest symbol id. Also used to fold noise points into valid clusters.
pub fn assign_symbol(cb: &Codebook, feature: &[f64]) -> Result<SymbolId, AbstractionError> {
    if cb.centroids.is_empty() {
        return Err(AbstractionError::EmptyCodebook);
    }
    if feature.len() != cb.dim() {
        return Err(AbstractionError::DimensionMismatch {
            expected: cb.dim(),
            got: feature.len(),
        });
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in cb.centroids.iter().enumerate() {
        let d = euclidean(c, feature);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}

/// Fills every step's symbol with its nearest-centroid assignment. Idempotent
/// for a fixed codebook and encoder; existing symbols are overwritten.
pub fn annotate_dataset(
    ds: &Dataset,
    cb: &Codebook,
    enc: &EncoderParams,
) -> Result<Dataset, AbstractionError> {
    if cb.centroids.is_empty() {
        return Err(AbstractionError::EmptyCodebook);
    }
    let mut out = ds.clone();
    for traj in out.trajectories.iter_mut() {
        for step in traj.steps.iter_mut() {
            let f = encode_observation(enc, &step.obs)?;
            step.symbol = Some(assign_symbol(cb, &f)?);
        }
    }
    Ok(out)
}
