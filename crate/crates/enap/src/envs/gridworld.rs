use thiserror::Error;

use super::Environment;
use crate::core::{Dataset, Step, Trajectory};

/// Cells are row-major on a 4x4 grid: start 0 (top-left), goal 15
/// (bottom-right), holes at {5, 7, 11, 12}.
pub const GRID_SIDE: usize = 4;
pub const GRID_CELLS: usize = GRID_SIDE * GRID_SIDE;
pub const HOLES: [usize; 4] = [5, 7, 11, 12];
pub const GOAL: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
    ];

    pub fn index(self) -> usize {
        match self {
            GridAction::Up => 0,
            GridAction::Down => 1,
            GridAction::Left => 2,
            GridAction::Right => 3,
        }
    }

    pub fn one_hot(self) -> Vec<f64> {
        let mut v = vec![0.0; 4];
        v[self.index()] = 1.0;
        v
    }

    pub fn from_one_hot(v: &[f64]) -> Option<GridAction> {
        let mut best = 0;
        for (i, &x) in v.iter().enumerate() {
            if x > v[best] {
                best = i;
            }
        }
        GridAction::ALL.get(best).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridTerminal {
    None,
    Goal,
    Hole,
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    pub agent: usize,
    pub terminal: GridTerminal,
}

impl Default for GridWorld {
    fn default() -> Self {
        GridWorld {
            agent: 0,
            terminal: GridTerminal::None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GridWorldError {
    #[error("stepped a terminal episode")]
    SteppedAfterTerminal,
}

/// Deterministic move; off-grid moves stay in place. Entering a hole ends the
/// episode in failure, the goal in success.
pub fn gridworld_step(
    env: &mut GridWorld,
    action: GridAction,
) -> Result<(usize, GridTerminal), GridWorldError> {
    if env.terminal != GridTerminal::None {
        return Err(GridWorldError::SteppedAfterTerminal);
    }
    let (row, col) = (env.agent / GRID_SIDE, env.agent % GRID_SIDE);
    let (nr, nc) = match action {
        GridAction::Up => (row.saturating_sub(1), col),
        GridAction::Down => ((row + 1).min(GRID_SIDE - 1), col),
        GridAction::Left => (row, col.saturating_sub(1)),
        GridAction::Right => (row, (col + 1).min(GRID_SIDE - 1)),
    };
    env.agent = nr * GRID_SIDE + nc;
    env.terminal = if env.agent == GOAL {
        GridTerminal::Goal
    } else if HOLES.contains(&env.agent) {
        GridTerminal::Hole
    } else {
        GridTerminal::None
    };
    Ok((env.agent, env.terminal))
}

pub fn cell_one_hot(cell: usize) -> Vec<f64> {
    let mut v = vec![0.0; GRID_CELLS];
    v[cell] = 1.0;
    v
}

/// The two demonstration walks used throughout: both go start to goal, share
/// the first three moves, and diverge at cell 9 before re-joining at cell 14.
///
/// tau1: 0 -D-> 4 -D-> 8 -R-> 9 -D-> 13 -R-> 14 -R-> 15
/// tau2: 0 -D-> 4 -D-> 8 -R-> 9 -R-> 10 -D-> 14 -R-> 15
///
/// Observations are one-hot cell vectors, actions one-hot moves, and symbols
/// are pre-assigned to the cell index (clustering is bypassed for this
/// discrete domain).
pub fn gridworld_demos() -> Dataset {
    use GridAction::*;
    let walks: [(&str, [(usize, GridAction); 6]); 2] = [
        (
            "tau1",
            [(0, Down), (4, Down), (8, Right), (9, Down), (13, Right), (14, Right)],
        ),
        (
            "tau2",
            [(0, Down), (4, Down), (8, Right), (9, Right), (10, Down), (14, Right)],
        ),
    ];
    let trajectories = walks
        .iter()
        .map(|(id, steps)| Trajectory {
            traj_id: (*id).to_string(),
            steps: steps
                .iter()
                .map(|&(cell, action)| Step {
                    obs: cell_one_hot(cell),
                    action: action.one_hot(),
                    symbol: Some(cell),
                })
                .collect(),
        })
        .collect();
    Dataset::new(trajectories).expect("demo dataset is well-formed")
}

impl Environment for GridWorld {
    fn observe(&self) -> Vec<f64> {
        cell_one_hot(self.agent)
    }

    fn step(&mut self, action: &[f64]) -> bool {
        if let Some(a) = GridAction::from_one_hot(action) {
            let _ = gridworld_step(self, a);
        }
        self.terminal == GridTerminal::None
    }

    fn is_terminal(&self) -> bool {
        self.terminal != GridTerminal::None
    }

    fn is_success(&self) -> bool {
        self.terminal == GridTerminal::Goal
    }

    fn obs_dim(&self) -> usize {
        GRID_CELLS
    }

    fn action_dim(&self) -> usize {
        4
    }
}
