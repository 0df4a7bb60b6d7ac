//! Point-mass maze with dense and sparse reward variants.
//!
//! The agent starts near the bottom-left corner of a 10x10 arena and must
//! reach a target near the top-right corner. Observations are
//! `[agent_x, agent_y, target_x, target_y]`; actions are a 2-D force in
//! `[-1, 1]^2`. Dynamics are a damped point mass, `x <- x + dt*v` followed by
//! `v <- 0.9*v + dt*a`, with the arena boundary acting as a hard wall.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAZE_SIZE: f64 = 10.0;
pub const OBS_DIM: usize = 4;
pub const ACTION_DIM: usize = 2;
pub const DT: f64 = 0.1;
pub const DAMPING: f64 = 0.9;
pub const SUCCESS_RADIUS: f64 = 0.5;
pub const DEFAULT_HORIZON: usize = 300;
/// Half-width of the uniform jitter applied to start and target positions.
pub const START_JITTER: f64 = 0.25;
pub const AGENT_START: [f64; 2] = [1.0, 1.0];
pub const TARGET_CENTER: [f64; 2] = [9.0, 9.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("step() called after the episode ended; call reset() first")]
    EpisodeOver,
    #[error("action must have {ACTION_DIM} finite components, got {0:?}")]
    InvalidAction(Vec<f64>),
    #[error("unknown environment id `{0}` (expected `pointmaze-dense` or `pointmaze-sparse`)")]
    UnknownId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvId {
    #[serde(rename = "pointmaze-dense")]
    PointMazeDense,
    #[serde(rename = "pointmaze-sparse")]
    PointMazeSparse,
}

impl EnvId {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::PointMazeDense => "pointmaze-dense",
            EnvId::PointMazeSparse => "pointmaze-sparse",
        }
    }

    pub fn is_sparse(self) -> bool {
        self == EnvId::PointMazeSparse
    }

    pub fn obs_dim(self) -> usize {
        OBS_DIM
    }

    pub fn action_dim(self) -> usize {
        ACTION_DIM
    }

    pub fn make(self) -> PointMaze {
        PointMaze::new(self)
    }

    /// Natural-language task description used in generator prompts.
    pub fn task_description(self) -> &'static str {
        match self {
            EnvId::PointMazeDense => {
                "A point-mass agent moves in an open 10x10 maze. It starts near the bottom-left corner \
                 and must reach a target near the top-right corner. At every step the reward is the \
                 negative Euclidean distance between the agent and the target; the episode ends \
                 successfully once the agent is within 0.5 units of the target."
            }
            EnvId::PointMazeSparse => {
                "A point-mass agent moves in an open 10x10 maze. It starts near the bottom-left corner \
                 and must reach a target near the top-right corner. The reward is 1 when the agent is \
                 within 0.5 units of the target (which ends the episode) and 0 otherwise."
            }
        }
    }

    /// Per-dimension description of the observation.
    pub fn dimension_details(self) -> &'static str {
        "s[0]: x coordinate of the agent's current position (0 to 10)\n\
         s[1]: y coordinate of the agent's current position (0 to 10)\n\
         s[2]: x coordinate of the target position (0 to 10)\n\
         s[3]: y coordinate of the target position (0 to 10)\n\
         The action is a 2-D linear force in the x and y directions, each in [-1, 1]."
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pointmaze-dense" => Ok(EnvId::PointMazeDense),
            "pointmaze-sparse" => Ok(EnvId::PointMazeSparse),
            other => Err(EnvError::UnknownId(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub agent_pos: [f64; 2],
    pub target_pos: [f64; 2],
    pub velocity: [f64; 2],
    pub step_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct PointMaze {
    id: EnvId,
    state: EnvState,
    horizon: usize,
    finished: bool,
}

impl PointMaze {
    pub fn new(id: EnvId) -> Self {
        PointMaze {
            id,
            state: EnvState {
                agent_pos: AGENT_START,
                target_pos: TARGET_CENTER,
                velocity: [0.0; 2],
                step_count: 0,
            },
            horizon: DEFAULT_HORIZON,
            finished: false,
        }
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn id(&self) -> EnvId {
        self.id
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Starts a new episode. Positions are jittered uniformly per axis from a
    /// generator seeded by `seed`.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jitter = || rng.random_range(-START_JITTER..=START_JITTER);
        self.state = EnvState {
            agent_pos: [AGENT_START[0] + jitter(), AGENT_START[1] + jitter()],
            target_pos: [TARGET_CENTER[0] + jitter(), TARGET_CENTER[1] + jitter()],
            velocity: [0.0; 2],
            step_count: 0,
        };
        self.finished = false;
        self.observation()
    }

    /// Places agent and target explicitly, at rest, with a fresh step count.
    pub fn set_positions(&mut self, agent: [f64; 2], target: [f64; 2]) -> Vec<f64> {
        let clamp = |p: [f64; 2]| [p[0].clamp(0.0, MAZE_SIZE), p[1].clamp(0.0, MAZE_SIZE)];
        self.state = EnvState {
            agent_pos: clamp(agent),
            target_pos: clamp(target),
            velocity: [0.0; 2],
            step_count: 0,
        };
        self.finished = false;
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        let s = &self.state;
        vec![
            s.agent_pos[0],
            s.agent_pos[1],
            s.target_pos[0],
            s.target_pos[1],
        ]
    }

    pub fn distance(&self) -> f64 {
        let dx = self.state.agent_pos[0] - self.state.target_pos[0];
        let dy = self.state.agent_pos[1] - self.state.target_pos[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.finished {
            return Err(EnvError::EpisodeOver);
        }
        if action.len() != ACTION_DIM || action.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::InvalidAction(action.to_vec()));
        }
        let s = &mut self.state;
        for axis in 0..2 {
            let force = action[axis].clamp(-1.0, 1.0);
            let moved = s.agent_pos[axis] + DT * s.velocity[axis];
            s.agent_pos[axis] = moved.clamp(0.0, MAZE_SIZE);
            s.velocity[axis] = DAMPING * s.velocity[axis] + DT * force;
            if moved != s.agent_pos[axis] {
                s.velocity[axis] = 0.0;
            }
        }
        s.step_count += 1;

        let distance = self.distance();
        let terminated = distance < SUCCESS_RADIUS;
        let reward = match self.id {
            EnvId::PointMazeDense => -distance,
            EnvId::PointMazeSparse => {
                if terminated {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let truncated = !terminated && self.state.step_count >= self.horizon;
        self.finished = terminated || truncated;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminated,
            truncated,
        })
    }
}
