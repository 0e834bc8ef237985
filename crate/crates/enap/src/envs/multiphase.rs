use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Environment;
use crate::core::{Dataset, Step, Trajectory};

/// Observation layout: [x, y, goal_one_hot_0, goal_one_hot_1].
pub const MULTIPHASE_OBS_DIM: usize = 4;

const START: [f64; 2] = [0.05, 0.05];
const WAYPOINT: [f64; 2] = [0.5, 0.5];
const GOALS: [[f64; 2]; 2] = [[0.95, 0.2], [0.2, 0.95]];
const SUCCESS_RADIUS: f64 = 0.05;
const DT: f64 = 0.1;
const KP: f64 = 6.0;
pub const MULTIPHASE_MAX_STEPS: usize = 60;

/// Point mass that must visit the waypoint before reaching either goal.
/// Actions are velocities clamped to [-1, 1]^2; position advances by DT times
/// the action. The assigned goal is exposed in the observation as a one-hot.
#[derive(Debug, Clone)]
pub struct MultiPhase2D {
    pub pos: [f64; 2],
    pub goal_idx: usize,
    pub visited_waypoint: bool,
    pub reached_goal: bool,
    pub steps_taken: usize,
}

impl MultiPhase2D {
    pub fn new(goal_idx: usize, start_jitter: [f64; 2]) -> Self {
        MultiPhase2D {
            pos: [START[0] + start_jitter[0], START[1] + start_jitter[1]],
            goal_idx,
            visited_waypoint: false,
            reached_goal: false,
            steps_taken: 0,
        }
    }

    /// Deterministic per-episode construction from a seed: small start jitter
    /// and alternating goal assignment.
    pub fn seeded(episode_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let jitter = [rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01)];
        MultiPhase2D::new((episode_seed % 2) as usize, jitter)
    }

    fn update_flags(&mut self) {
        if dist(self.pos, WAYPOINT) <= SUCCESS_RADIUS {
            self.visited_waypoint = true;
        }
        if self.visited_waypoint
            && GOALS.iter().any(|g| dist(self.pos, *g) <= SUCCESS_RADIUS)
        {
            self.reached_goal = true;
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Environment for MultiPhase2D {
    fn observe(&self) -> Vec<f64> {
        let mut obs = vec![self.pos[0], self.pos[1], 0.0, 0.0];
        obs[2 + self.goal_idx] = 1.0;
        obs
    }

    fn step(&mut self, action: &[f64]) -> bool {
        if self.is_terminal() {
            return false;
        }
        let vx = action.first().copied().unwrap_or(0.0).clamp(-1.0, 1.0);
        let vy = action.get(1).copied().unwrap_or(0.0).clamp(-1.0, 1.0);
        self.pos[0] += DT * vx;
        self.pos[1] += DT * vy;
        self.steps_taken += 1;
        self.update_flags();
        !self.is_terminal()
    }

    fn is_terminal(&self) -> bool {
        self.reached_goal || self.steps_taken >= MULTIPHASE_MAX_STEPS
    }

    fn is_success(&self) -> bool {
        self.reached_goal
    }

    fn obs_dim(&self) -> usize {
        MULTIPHASE_OBS_DIM
    }

    fn action_dim(&self) -> usize {
        2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoMode {
    SingleGoal,
    Bimodal,
}

/// Scripted expert demonstrations: proportional control toward the waypoint,
/// then toward the episode's goal, with Gaussian action noise (sigma 0.01).
/// Bimodal mode alternates goals across episodes.
pub fn multiphase2d_demos(n: usize, seed: u64, mode: DemoMode) -> Dataset {
    assert!(n >= 1, "need at least one demo");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectories = Vec::with_capacity(n);
    for i in 0..n {
        let goal_idx = match mode {
            DemoMode::SingleGoal => 0,
            DemoMode::Bimodal => i % 2,
        };
        let jitter = [rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01)];
        let mut env = MultiPhase2D::new(goal_idx, jitter);
        let mut steps = Vec::new();
        while !env.is_terminal() {
            let target = if env.visited_waypoint {
                GOALS[env.goal_idx]
            } else {
                WAYPOINT
            };
            let mut action = [
                (KP * (target[0] - env.pos[0])).clamp(-1.0, 1.0),
                (KP * (target[1] - env.pos[1])).clamp(-1.0, 1.0),
            ];
            for a in action.iter_mut() {
                *a = (*a + gaussian(&mut rng) * 0.01).clamp(-1.0, 1.0);
            }
            steps.push(Step {
                obs: env.observe(),
                action: action.to_vec(),
                symbol: None,
            });
            env.step(&action);
        }
        trajectories.push(Trajectory {
            traj_id: format!("demo{i:04}"),
            steps,
        });
    }
    Dataset::new(trajectories).expect("demo dataset is well-formed")
}

/// Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
