//! Deterministic test environments and demo generators: a 4x4 gridworld with
//! holes and a continuous two-phase point-mass task with bimodal goals.

mod gridworld;
mod multiphase;

pub use gridworld::{
    gridworld_demos, gridworld_step, GridAction, GridTerminal, GridWorld, GridWorldError,
};
pub use multiphase::{multiphase2d_demos, DemoMode, MultiPhase2D, MULTIPHASE_OBS_DIM};

use crate::core::Dataset;

/// Common surface the controller rollout loop drives.
pub trait Environment {
    /// Current observation vector.
    fn observe(&self) -> Vec<f64>;
    /// Applies an action; returns true while the episode continues.
    fn step(&mut self, action: &[f64]) -> bool;
    fn is_terminal(&self) -> bool;
    fn is_success(&self) -> bool;
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
}

/// Replays a dataset trajectory's actions through an environment, returning
/// whether the episode ended in success.
pub fn replay_success<E: Environment>(env: &mut E, ds: &Dataset, traj_idx: usize) -> bool {
    for step in &ds.trajectories[traj_idx].steps {
        if env.is_terminal() {
            break;
        }
        env.step(&step.action);
    }
    env.is_success()
}
