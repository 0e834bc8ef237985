use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index into the discrete input alphabet Σ.
pub type SymbolId = usize;

/// One time step of a trajectory. `symbol` is absent before abstraction and
/// filled in by [`crate::abstraction::annotate_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    #[serde(default)]
    pub symbol: Option<SymbolId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub traj_id: String,
    pub steps: Vec<Step>,
}

impl Trajectory {
    /// Symbol sequence of the trajectory; panics if a step is unannotated.
    pub fn symbols(&self) -> Vec<SymbolId> {
        self.steps
            .iter()
            .map(|s| s.symbol.expect("trajectory not annotated"))
            .collect()
    }

    pub fn is_annotated(&self) -> bool {
        self.steps.iter().all(|s| s.symbol.is_some())
    }
}

/// A set of homogeneous trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub obs_dim: usize,
    pub action_dim: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("dataset has no trajectories")]
    Empty,
    #[error("trajectory {0} has no steps")]
    EmptyTrajectory(String),
    #[error("trajectory {traj_id} step {step}: expected obs dim {expected}, got {got}")]
    ObsDimMismatch {
        traj_id: String,
        step: usize,
        expected: usize,
        got: usize,
    },
    #[error("trajectory {traj_id} step {step}: expected action dim {expected}, got {got}")]
    ActionDimMismatch {
        traj_id: String,
        step: usize,
        expected: usize,
        got: usize,
    },
    #[error("trajectory {traj_id} step {step} contains a non-finite value")]
    NonFinite { traj_id: String, step: usize },
}

impl Dataset {
    /// Builds a dataset from trajectories, inferring and checking dimensions.
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self, DatasetError> {
        let first = trajectories.first().ok_or(DatasetError::Empty)?;
        let first_step = first
            .steps
            .first()
            .ok_or_else(|| DatasetError::EmptyTrajectory(first.traj_id.clone()))?;
        let obs_dim = first_step.obs.len();
        let action_dim = first_step.action.len();
        let ds = Dataset {
            trajectories,
            obs_dim,
            action_dim,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.trajectories.is_empty() {
            return Err(DatasetError::Empty);
        }
        for traj in &self.trajectories {
            if traj.steps.is_empty() {
                return Err(DatasetError::EmptyTrajectory(traj.traj_id.clone()));
            }
            for (i, step) in traj.steps.iter().enumerate() {
                if step.obs.len() != self.obs_dim {
                    return Err(DatasetError::ObsDimMismatch {
                        traj_id: traj.traj_id.clone(),
                        step: i,
                        expected: self.obs_dim,
                        got: step.obs.len(),
                    });
                }
                if step.action.len() != self.action_dim {
                    return Err(DatasetError::ActionDimMismatch {
                        traj_id: traj.traj_id.clone(),
                        step: i,
                        expected: self.action_dim,
                        got: step.action.len(),
                    });
                }
                if step
                    .obs
                    .iter()
                    .chain(step.action.iter())
                    .any(|v| !v.is_finite())
                {
                    return Err(DatasetError::NonFinite {
                        traj_id: traj.traj_id.clone(),
                        step: i,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.steps.len()).sum()
    }

    pub fn is_annotated(&self) -> bool {
        self.trajectories.iter().all(|t| t.is_annotated())
    }

    /// Largest symbol id plus one, or None if nothing is annotated.
    pub fn alphabet_size(&self) -> Option<usize> {
        self.trajectories
            .iter()
            .flat_map(|t| t.steps.iter())
            .filter_map(|s| s.symbol)
            .max()
            .map(|m| m + 1)
    }
}
