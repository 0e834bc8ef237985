//! Configuration, seed discipline, and the stage drivers behind the `enap`
//! binary. All randomness flows from one root seed split deterministically
//! per stage; runs are stamped with the configuration hash.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::abstraction::{
    annotate_dataset, cluster_features, encode_dataset, refine_kmeans, ClusterParams, Codebook,
    EncoderParams,
};
use crate::control::{em_train, EmConfig, FallbackPolicy, PolicyBundle};
use crate::core::Dataset;
use crate::history_encoder::{train_history_encoder, HistoryEncoder, TrainConfig};
use crate::lstar_extended::MineConfig;

/// Every knob of the pipeline, loadable from a declarative key = value
/// document (TOML) and overridable by command-line flags. Serialization is a
/// round-trip identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub tau_sim: f64,
    pub eps_err: f64,
    pub eps_tiebreak: f64,
    pub lambda_contrast: f64,
    pub lambda_reg: f64,
    pub rnn_hidden: usize,
    pub symbol_embed: usize,
    pub em_iters: usize,
    pub seed: u64,
    pub min_cluster_size: Option<usize>,
    pub min_samples: Option<usize>,
    pub refine_kmeans: bool,
    pub normalize_features: bool,
    pub encoder_mode: String,
    pub embed_dim: usize,
    pub rnn_epochs: usize,
    pub residual_hidden: Vec<usize>,
    pub m_epochs: usize,
    pub lr: f64,
    pub eq_on_holdout: bool,
    pub holdout_fraction: f64,
    pub prune: bool,
    pub max_eq_rounds: usize,
    pub state_embed_dim: usize,
    pub fallback: String,
    pub max_episode_steps: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tau_sim: 0.9,
            eps_err: 0.1,
            eps_tiebreak: 0.5,
            lambda_contrast: 0.5,
            lambda_reg: 0.01,
            rnn_hidden: 64,
            symbol_embed: 16,
            em_iters: 1,
            seed: 0,
            min_cluster_size: None,
            min_samples: None,
            refine_kmeans: true,
            normalize_features: false,
            encoder_mode: "exact".into(),
            embed_dim: 64,
            rnn_epochs: 30,
            residual_hidden: vec![64],
            m_epochs: 200,
            lr: 1e-3,
            eq_on_holdout: false,
            holdout_fraction: 0.2,
            prune: true,
            max_eq_rounds: 50,
            state_embed_dim: 16,
            fallback: "nearest-state".into(),
            max_episode_steps: 60,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid {field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, field: &'static str, message: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field,
                    message: message.to_string(),
                })
            }
        };
        check(
            self.tau_sim > 0.0 && self.tau_sim <= 1.0,
            "tau_sim",
            "must be in (0, 1]",
        )?;
        check(self.eps_err > 0.0, "eps_err", "must be positive")?;
        check(
            self.eps_tiebreak > 0.0 && self.eps_tiebreak < 1.0,
            "eps_tiebreak",
            "must be in (0, 1)",
        )?;
        check(self.em_iters >= 1, "em_iters", "must be at least 1")?;
        check(
            matches!(self.encoder_mode.as_str(), "exact" | "random-rnn" | "trained-rnn"),
            "encoder_mode",
            "must be exact | random-rnn | trained-rnn",
        )?;
        check(
            matches!(self.fallback.as_str(), "nearest-state" | "hold-last"),
            "fallback",
            "must be nearest-state | hold-last",
        )?;
        Ok(())
    }

    /// Hash of the canonical serialization; stamps every run.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn fallback_policy(&self) -> FallbackPolicy {
        match self.fallback.as_str() {
            "hold-last" => FallbackPolicy::HoldLastAction,
            _ => FallbackPolicy::NearestStateJump,
        }
    }

    pub fn mine_config(&self) -> MineConfig {
        MineConfig {
            tau_sim: self.tau_sim,
            eps_err: self.eps_err,
            max_eq_rounds: self.max_eq_rounds,
            prune: self.prune,
        }
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            mine: self.mine_config(),
            rnn_hidden: self.rnn_hidden,
            sym_embed_dim: self.symbol_embed,
            rnn_epochs: self.rnn_epochs,
            lambda_contrast: self.lambda_contrast,
            min_cluster_size: self.min_cluster_size,
            refine: self.refine_kmeans,
            state_embed_dim: self.state_embed_dim,
            residual_hidden: self.residual_hidden.clone(),
            m_epochs: self.m_epochs,
            lr: self.lr,
            lambda_reg: self.lambda_reg,
            loss_tol: 1e-6,
            eps_tiebreak: self.eps_tiebreak,
            fallback: self.fallback_policy(),
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden_dim: self.rnn_hidden,
            sym_embed_dim: self.symbol_embed,
            epochs: self.rnn_epochs,
            lr: self.lr,
            lambda_contrast: self.lambda_contrast,
            seed: stage_seed(self.seed, "rnn"),
            normalize_output: true,
        }
    }
}

/// Deterministic per-stage seed split from the root seed.
pub fn stage_seed(root: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(tag.as_bytes());
    let d = hasher.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Abstraction(#[from] crate::abstraction::AbstractionError),
    #[error(transparent)]
    History(#[from] crate::history_encoder::HistoryError),
    #[error(transparent)]
    Mine(#[from] crate::lstar_extended::MineError),
    #[error(transparent)]
    Control(#[from] crate::control::ControlError),
    #[error("dataset must be symbol-annotated for this stage (run `abstract` first)")]
    NotAnnotated,
    #[error("unknown encoder mode {0}")]
    UnknownEncoderMode(String),
}

/// Discovers the alphabet: encode, density-cluster, optionally refine with
/// K-Means, and annotate every step (noise folds into the nearest cluster
/// through the codebook assignment).
pub fn abstract_stage(
    ds: &Dataset,
    enc: &EncoderParams,
    cfg: &PipelineConfig,
) -> Result<(Codebook, Dataset), PipelineError> {
    let mut features = encode_dataset(enc, ds)?;
    if cfg.normalize_features {
        for f in features.iter_mut() {
            crate::core::normalize_in_place(f);
        }
    }
    let mcs = cfg
        .min_cluster_size
        .unwrap_or_else(|| (ds.step_count() / 100).max(5));
    let min_samples = cfg.min_samples.unwrap_or(mcs);
    let clustering = cluster_features(
        &features,
        ClusterParams {
            min_cluster_size: mcs,
            min_samples,
        },
    )?;
    let codebook = if cfg.refine_kmeans {
        let (centroids, _) = refine_kmeans(
            &features,
            clustering.centroids.len(),
            stage_seed(cfg.seed, "kmeans"),
        )?;
        Codebook {
            centroids,
            min_cluster_size: mcs,
            refined: true,
        }
    } else {
        Codebook {
            centroids: clustering.centroids,
            min_cluster_size: mcs,
            refined: false,
        }
    };
    let annotated = annotate_dataset(ds, &codebook, enc)?;
    Ok((codebook, annotated))
}

/// Builds the history encoder for the configured mode; training modes expect
/// an annotated dataset.
pub fn encoder_stage(
    ds: &Dataset,
    cfg: &PipelineConfig,
) -> Result<HistoryEncoder, PipelineError> {
    match cfg.encoder_mode.as_str() {
        "exact" => Ok(HistoryEncoder::exact(cfg.embed_dim)),
        "random-rnn" => {
            if !ds.is_annotated() {
                return Err(PipelineError::NotAnnotated);
            }
            Ok(HistoryEncoder::random_rnn(
                cfg.rnn_hidden,
                ds.action_dim,
                cfg.symbol_embed,
                ds.alphabet_size().unwrap_or(1),
                stage_seed(cfg.seed, "rnn-init"),
            ))
        }
        "trained-rnn" => {
            if !ds.is_annotated() {
                return Err(PipelineError::NotAnnotated);
            }
            let (enc, _) = train_history_encoder(ds, &cfg.train_config())?;
            Ok(enc)
        }
        other => Err(PipelineError::UnknownEncoderMode(other.to_string())),
    }
}

/// Deterministic train/holdout split by trajectory index.
pub fn split_holdout(ds: &Dataset, fraction: f64) -> (Dataset, Dataset) {
    let n = ds.trajectories.len();
    let holdout_n = ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let step = (n / holdout_n).max(1);
    let mut train = Vec::new();
    let mut hold = Vec::new();
    for (i, t) in ds.trajectories.iter().enumerate() {
        if i % step == 0 && hold.len() < holdout_n {
            hold.push(t.clone());
        } else {
            train.push(t.clone());
        }
    }
    if train.is_empty() {
        train = hold.clone();
    }
    (
        Dataset::new(train).expect("train split non-empty"),
        Dataset::new(hold).expect("holdout split non-empty"),
    )
}

/// Full residual-training driver (the whole EM loop).
pub fn train_residual_stage(
    ds: &Dataset,
    init_enc: &EncoderParams,
    cfg: &PipelineConfig,
) -> Result<PolicyBundle, PipelineError> {
    Ok(em_train(ds, init_enc, cfg.em_iters, &cfg.em_config())?)
}
