//! The bi-level reactive controller and its training loop.
//!
//! At inference the machine supplies a coarse action prior for the current
//! (state, symbol); a small residual network conditioned on the state
//! embedding, the encoded observation and the prior refines it. The state
//! updates by watching the next symbol and preferring destinations whose
//! next-input set contains it. Training alternates structure extraction
//! (cluster, encode history, mine) with behavior-cloning of the residual
//! against the frozen machine.

mod bundle;
mod train;

pub use bundle::{
    act, coarse_action, next_state, run_episode, run_episode_with, ActOutput, ControllerState,
    EpisodeTrace, FallbackPolicy, PolicyBundle, TraceStep,
};
pub use train::{
    behavior_cloning, bundle_action_mse, em_train, joint_loss, label_dataset_states,
    nd_trace_path, EmConfig, JointGrads, LabeledStep,
};

use thiserror::Error;

use crate::abstraction::AbstractionError;
use crate::history_encoder::HistoryError;
use crate::lstar_extended::MineError;
use crate::nnkit::NnError;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("no transition out of q{state} on symbol c{symbol}")]
    NoTransition { state: usize, symbol: usize },
    #[error("dead end: no candidate successor from q{state} on c{symbol}")]
    DeadEnd { state: usize, symbol: usize },
    #[error("trajectory {0} has no valid path through the machine")]
    NoValidPath(String),
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Mine(#[from] MineError),
    #[error(transparent)]
    History(#[from] HistoryError),
}
