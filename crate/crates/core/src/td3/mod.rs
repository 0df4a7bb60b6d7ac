//! TD3 over augmented states `s^c = (s, F(s))` with blended rewards
//! `r + w * G(s^c)`.
//!
//! One [`Td3Trainer`] is strictly single-threaded and owns its environment,
//! networks, replay buffer and random stream, so several trainers can run in
//! parallel without sharing anything.

mod agent;
mod replay;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::DslError;
use crate::env::EnvError;
use crate::nn::{MlpParams, NnError};
use crate::trajectory::EpisodeTrace;

pub use agent::{Td3Agent, UpdateStats};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use trainer::{evaluate, select_action, train, Evaluation, Td3Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub total_steps: usize,
    /// Uniform-random actions for this many steps before learning starts.
    pub start_steps: usize,
    pub batch_size: usize,
    pub gamma: f64,
    /// Target-network update rate.
    pub rho: f64,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: usize,
    pub exploration_noise: f64,
    pub replay_capacity: usize,
    /// Intrinsic reward weight `w`.
    pub intrinsic_weight: f64,
    pub eval_episodes: usize,
    /// Curve resolution in environment steps; 0 evaluates only at the end.
    pub eval_every: usize,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 50_000,
            start_steps: 2_000,
            batch_size: 256,
            gamma: 0.99,
            rho: 0.005,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            exploration_noise: 0.1,
            replay_capacity: 1_000_000,
            intrinsic_weight: 0.02,
            eval_episodes: 10,
            eval_every: 5_000,
            hidden: vec![64, 64],
            actor_lr: 1e-4,
            critic_lr: 3e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Checks value ranges. Errors name the offending key.
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |key: &str, message: &str| {
            Err(TrainError::Config {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        if self.total_steps == 0 {
            return bad("total_steps", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho", "must lie in (0, 1]");
        }
        if !(self.policy_noise >= 0.0 && self.policy_noise.is_finite()) {
            return bad("policy_noise", "must be finite and non-negative");
        }
        if !(self.noise_clip >= 0.0 && self.noise_clip.is_finite()) {
            return bad("noise_clip", "must be finite and non-negative");
        }
        if self.policy_delay == 0 {
            return bad("policy_delay", "must be at least 1");
        }
        if !(self.exploration_noise >= 0.0 && self.exploration_noise.is_finite()) {
            return bad("exploration_noise", "must be finite and non-negative");
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity", "must be positive");
        }
        if !(self.intrinsic_weight >= 0.0 && self.intrinsic_weight.is_finite()) {
            return bad("intrinsic_weight", "must be finite and non-negative");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes", "must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden", "needs at least one positive layer width");
        }
        if !(self.actor_lr > 0.0 && self.actor_lr.is_finite()) {
            return bad("actor_lr", "must be positive");
        }
        if !(self.critic_lr > 0.0 && self.critic_lr.is_finite()) {
            return bad("critic_lr", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("program dimensions do not fit the environment: {0}")]
    Dimensions(String),
    #[error("candidate disqualified at step {step}: {source}")]
    Disqualified {
        step: usize,
        #[source]
        source: DslError,
    },
    #[error("network training diverged at step {step}")]
    Diverged { step: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl TrainError {
    pub fn is_disqualification(&self) -> bool {
        matches!(
            self,
            TrainError::Disqualified { .. } | TrainError::Diverged { .. }
        )
    }
}

/// One evaluation point on the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    /// `nu`: mean return on dense tasks, success rate on sparse ones.
    pub score: f64,
    pub mean_return: f64,
    pub success_rate: f64,
    pub wall_time_s: f64,
}

/// `step,score,mean_return,success_rate[,wall_time_s]`. Floats use the
/// shortest round-trip form, so equal curves give equal bytes.
pub fn curve_to_csv(curve: &[CurvePoint], with_wall_time: bool) -> String {
    let mut out = String::from("step,score,mean_return,success_rate");
    out.push_str(if with_wall_time {
        ",wall_time_s\n"
    } else {
        "\n"
    });
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{}",
            p.step, p.score, p.mean_return, p.success_rate
        ));
        if with_wall_time {
            out.push_str(&format!(",{:.3}", p.wall_time_s));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub actor: MlpParams,
    pub critic1: MlpParams,
    pub critic2: MlpParams,
    /// Final score `nu` over `eval_episodes` deterministic episodes.
    pub score: f64,
    pub mean_return: f64,
    pub success_rate: f64,
    pub eval_traces: Vec<EpisodeTrace>,
    pub curve: Vec<CurvePoint>,
    /// Fingerprint of the actor at step 0.
    pub init_fingerprint: u64,
    pub episodes: usize,
    pub wall_time_s: f64,
}

impl TrainResult {
    /// Smaller of the two critics' spectral-norm products.
    pub fn critic_spectral_bound(&self) -> f64 {
        let a = crate::nn::value_lipschitz_bound(&self.critic1);
        let b = crate::nn::value_lipschitz_bound(&self.critic2);
        a.min(b)
    }

    /// Sum of curve scores; the curves of runs sharing a config share a step grid.
    pub fn curve_area(&self) -> f64 {
        self.curve.iter().map(|p| p.score).sum()
    }
}

/// Mixes a base seed with a stream tag and an index (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
