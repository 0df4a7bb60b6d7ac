//! Run configuration: one flat TOML table, unknown keys rejected.
//!
//! ```toml
//! env = "pointmaze-dense"      # or "pointmaze-sparse"
//! generator = "mock"           # or "remote"
//! candidates = 3               # K, candidates per iteration
//! iterations = 2               # I
//! small_steps = 20000          # N_small, steps per candidate training
//! final_steps = 50000          # N, steps for the final training
//! intrinsic_weight = 0.02      # w; defaults to 0.02 (dense) or 0.2 (sparse)
//! tau = 0.9                    # soft-update rate of the Lipschitz arrays
//! gamma = 0.99
//! seed = 0
//! feedback = "reward"          # or "discounted_return", "spectral_norm"
//! out_dir = "runs/lesr"
//! ```
//!
//! Every key is optional. [`RunConfig`] lists the remaining ones (TD3
//! settings, remote endpoint, worker count).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvId;
use crate::lipschitz::{
    FeedbackVariant, DEFAULT_EXACT_MAX_LEN, DEFAULT_SAMPLED_PAIRS, DEFAULT_TAU,
};
use crate::llm::RemoteConfig;
use crate::td3::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvId,
    pub generator: GeneratorMode,
    /// K
    pub candidates: usize,
    /// I
    pub iterations: usize,
    /// N_small
    pub small_steps: usize,
    /// N
    pub final_steps: usize,
    /// `w`; `None` picks the per-environment default.
    pub intrinsic_weight: Option<f64>,
    pub tau: f64,
    pub gamma: f64,
    pub seed: u64,
    pub feedback: FeedbackVariant,
    pub out_dir: PathBuf,
    /// Parallel training workers; 0 means `min(K, available cores)`.
    pub workers: usize,
    /// Extra attempts per candidate slot after an invalid response.
    pub generation_retries: usize,
    /// Trajectories longer than this use sampled pairs for Lipschitz estimates.
    pub lipschitz_exact_max_len: usize,
    pub lipschitz_sampled_pairs: usize,

    pub batch_size: usize,
    pub start_steps: usize,
    pub hidden: Vec<usize>,
    pub eval_episodes: usize,
    pub eval_every: usize,
    pub exploration_noise: f64,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: usize,
    pub rho: f64,
    pub replay_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,

    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub request_timeout_s: u64,
    pub request_retries: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let td3 = TrainConfig::default();
        let remote = RemoteConfig::default();
        RunConfig {
            env: EnvId::PointMazeDense,
            generator: GeneratorMode::Mock,
            candidates: 3,
            iterations: 2,
            small_steps: 20_000,
            final_steps: 50_000,
            intrinsic_weight: None,
            tau: DEFAULT_TAU,
            gamma: td3.gamma,
            seed: 0,
            feedback: FeedbackVariant::Reward,
            out_dir: PathBuf::from("runs/lesr"),
            workers: 0,
            generation_retries: 3,
            lipschitz_exact_max_len: DEFAULT_EXACT_MAX_LEN,
            lipschitz_sampled_pairs: DEFAULT_SAMPLED_PAIRS,
            batch_size: td3.batch_size,
            start_steps: td3.start_steps,
            hidden: td3.hidden,
            eval_episodes: td3.eval_episodes,
            eval_every: td3.eval_every,
            exploration_noise: td3.exploration_noise,
            policy_noise: td3.policy_noise,
            noise_clip: td3.noise_clip,
            policy_delay: td3.policy_delay,
            rho: td3.rho,
            replay_capacity: td3.replay_capacity,
            actor_lr: td3.actor_lr,
            critic_lr: td3.critic_lr,
            endpoint: remote.endpoint,
            model: remote.model,
            api_key_env: remote.api_key_env,
            temperature: remote.temperature,
            request_timeout_s: remote.timeout_s,
            request_retries: remote.retries,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.to_string(),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// `w` actually used: explicit value or 0.02 (dense) / 0.2 (sparse).
    pub fn effective_intrinsic_weight(&self) -> f64 {
        self.intrinsic_weight
            .unwrap_or(if self.env.is_sparse() { 0.2 } else { 0.02 })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.candidates == 0 {
            return Err(invalid("candidates", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be at least 1"));
        }
        if self.small_steps == 0 {
            return Err(invalid("small_steps", "must be positive"));
        }
        if self.final_steps == 0 {
            return Err(invalid("final_steps", "must be positive"));
        }
        if let Some(w) = self.intrinsic_weight {
            if !(w.is_finite() && w >= 0.0) {
                return Err(invalid(
                    "intrinsic_weight",
                    "must be finite and non-negative",
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(invalid("tau", "must lie in [0, 1]"));
        }
        if self.lipschitz_exact_max_len < 2 {
            return Err(invalid("lipschitz_exact_max_len", "must be at least 2"));
        }
        if self.lipschitz_sampled_pairs == 0 {
            return Err(invalid("lipschitz_sampled_pairs", "must be positive"));
        }
        if self.generator == GeneratorMode::Remote {
            if self.endpoint.trim().is_empty() {
                return Err(invalid("endpoint", "required for the remote generator"));
            }
            if self.model.trim().is_empty() {
                return Err(invalid("model", "required for the remote generator"));
            }
            if self.api_key_env.trim().is_empty() {
                return Err(invalid("api_key_env", "required for the remote generator"));
            }
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(invalid("temperature", "must be finite and non-negative"));
        }
        // TD3 keys share names with TrainConfig, so its messages name the key
        self.train_config(self.small_steps, self.seed)
            .validate()
            .map_err(|e| match e {
                crate::td3::TrainError::Config { key, message } => {
                    ConfigError::Invalid { key, message }
                }
                other => ConfigError::Invalid {
                    key: "td3".into(),
                    message: other.to_string(),
                },
            })
    }

    /// TD3 settings for one training process.
    pub fn train_config(&self, total_steps: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            total_steps,
            start_steps: self.start_steps,
            batch_size: self.batch_size,
            gamma: self.gamma,
            rho: self.rho,
            policy_noise: self.policy_noise,
            noise_clip: self.noise_clip,
            policy_delay: self.policy_delay,
            exploration_noise: self.exploration_noise,
            replay_capacity: self.replay_capacity,
            intrinsic_weight: self.effective_intrinsic_weight(),
            eval_episodes: self.eval_episodes,
            eval_every: self.eval_every,
            hidden: self.hidden.clone(),
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            seed,
        }
    }

    pub fn remote_config(&self) -> RemoteConfig {
        RemoteConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            temperature: self.temperature,
            timeout_s: self.request_timeout_s,
            retries: self.request_retries,
        }
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            return self.workers;
        }
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        self.candidates.min(cores).max(1)
    }
}
