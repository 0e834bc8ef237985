//! Symbol abstraction: feature encoding and alphabet discovery.
pub mod codebook;
pub mod encoder;
pub mod hdbscan;
pub mod kmeans;

pub use codebook::{annotate_dataset, assign_symbol, Codebook};
pub use encoder::{encode_dataset, encode_observation, EncoderParams};
pub use hdbscan::{cluster_features, ClusterLabel, ClusterParams, Clustering};
pub use kmeans::refine_kmeans;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AbstractionError {
    #[error("expected input dim {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no clusters found: every point is noise")]
    NoClustersFound,
    #[error("k = {k} exceeds the number of points {points}")]
    KTooLarge { k: usize, points: usize },
    #[error("need at least {needed} features, got {got}")]
    TooFewFeatures { needed: usize, got: usize },
    #[error("codebook is empty")]
    EmptyCodebook,
}
