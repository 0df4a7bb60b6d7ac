use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::agent::Td3Agent;
use super::replay::{ReplayBuffer, Transition};
use super::{derive_seed, CurvePoint, TrainConfig, TrainError, TrainResult};
use crate::dsl::{ReprProgram, RewardProgram};
use crate::env::{EnvId, PointMaze};
use crate::nn::{Head, MlpParams};
use crate::trajectory::EpisodeTrace;

const STREAM_TRAIN_RNG: u64 = 1;
const STREAM_TRAIN_EPISODE: u64 = 2;
const STREAM_EVAL_EPISODE: u64 = 3;

/// Result of deterministic-policy rollouts.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `nu`: mean return on dense tasks, success rate on sparse ones.
    pub score: f64,
    pub mean_return: f64,
    pub success_rate: f64,
    pub traces: Vec<EpisodeTrace>,
}

/// Actor output plus `N(0, noise_std^2)` per component, clipped to the
/// actor's action bound. With `noise_std == 0` the generator is not touched.
pub fn select_action(
    actor: &MlpParams,
    s_c: &[f64],
    noise_std: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let bound = match actor.head {
        Head::TanhScaled { bound } => bound,
        Head::Identity => 1.0,
    };
    let mut a = actor.forward(s_c);
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("finite std");
        for v in &mut a {
            *v += normal.sample(rng);
        }
    }
    for v in &mut a {
        *v = v.clamp(-bound, bound);
    }
    a
}

fn augment(repr: Option<&ReprProgram>, obs: &[f64], step: usize) -> Result<Vec<f64>, TrainError> {
    match repr {
        Some(p) => p
            .augment(obs)
            .map_err(|source| TrainError::Disqualified { step, source }),
        None => Ok(obs.to_vec()),
    }
}

/// Rolls out the deterministic policy for `episodes` episodes whose start
/// states are fixed by `seed`.
pub fn evaluate(
    actor: &MlpParams,
    env_id: EnvId,
    repr: Option<&ReprProgram>,
    episodes: usize,
    seed: u64,
) -> Result<Evaluation, TrainError> {
    evaluate_at(actor, env_id, repr, episodes, seed, 0)
}

fn evaluate_at(
    actor: &MlpParams,
    env_id: EnvId,
    repr: Option<&ReprProgram>,
    episodes: usize,
    seed: u64,
    step: usize,
) -> Result<Evaluation, TrainError> {
    let mut env = PointMaze::new(env_id);
    let mut traces = Vec::with_capacity(episodes);
    let mut total_return = 0.0;
    let mut successes = 0usize;
    for ep in 0..episodes {
        let obs = env.reset(derive_seed(seed, STREAM_EVAL_EPISODE, ep as u64));
        let mut s_c = augment(repr, &obs, step)?;
        let mut trace = EpisodeTrace::default();
        loop {
            let action = actor.forward(&s_c);
            let res = env.step(&action)?;
            s_c = augment(repr, &res.observation, step)?;
            trace.push(res.observation.clone(), s_c.clone(), res.reward);
            if res.done() {
                successes += usize::from(res.terminated);
                break;
            }
        }
        total_return += trace.total_reward();
        traces.push(trace);
    }
    let n = episodes.max(1) as f64;
    let mean_return = total_return / n;
    let success_rate = successes as f64 / n;
    let score = if env_id.is_sparse() {
        success_rate
    } else {
        mean_return
    };
    Ok(Evaluation {
        score,
        mean_return,
        success_rate,
        traces,
    })
}

/// One TD3 training process on `s^c = (s, F(s))` with reward `r + w * G(s^c)`.
pub struct Td3Trainer<'a> {
    env_id: EnvId,
    repr: Option<&'a ReprProgram>,
    reward: Option<&'a RewardProgram>,
    cfg: TrainConfig,
    agent: Td3Agent,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
}

impl<'a> Td3Trainer<'a> {
    pub fn new(
        env_id: EnvId,
        repr: Option<&'a ReprProgram>,
        reward: Option<&'a RewardProgram>,
        cfg: TrainConfig,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        let obs_dim = env_id.obs_dim();
        if let Some(p) = repr {
            if p.input_dim() != obs_dim {
                return Err(TrainError::Dimensions(format!(
                    "representation program reads {} inputs, environment observes {}",
                    p.input_dim(),
                    obs_dim
                )));
            }
        }
        let state_dim = obs_dim + repr.map_or(0, |p| p.output_dim());
        if let Some(g) = reward {
            if g.input_dim() != state_dim {
                return Err(TrainError::Dimensions(format!(
                    "reward program reads {} inputs, augmented state has {}",
                    g.input_dim(),
                    state_dim
                )));
            }
        }
        let action_dim = env_id.action_dim();
        let agent = Td3Agent::new(state_dim, action_dim, 1.0, &cfg, cfg.seed)?;
        // the buffer never holds more than total_steps entries
        let capacity = cfg.replay_capacity.min(cfg.total_steps);
        let replay = ReplayBuffer::new(state_dim, action_dim, capacity);
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_TRAIN_RNG, 0));
        Ok(Td3Trainer {
            env_id,
            repr,
            reward,
            cfg,
            agent,
            replay,
            rng,
        })
    }

    pub fn agent(&self) -> &Td3Agent {
        &self.agent
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Runs `total_steps` environment steps. Can be called once.
    pub fn run(&mut self) -> Result<TrainResult, TrainError> {
        let start = Instant::now();
        let cfg = self.cfg.clone();
        let init_fingerprint = self.agent.actor.fingerprint();
        let w = cfg.intrinsic_weight;
        let mut env = PointMaze::new(self.env_id);
        let mut episode = 0u64;
        let obs = env.reset(derive_seed(cfg.seed, STREAM_TRAIN_EPISODE, episode));
        let mut s_c = augment(self.repr, &obs, 0)?;
        let mut curve = Vec::new();

        for t in 0..cfg.total_steps {
            let action = if t < cfg.start_steps {
                (0..self.agent.action_dim())
                    .map(|_| self.rng.random_range(-1.0..=1.0))
                    .collect()
            } else {
                select_action(
                    &self.agent.actor,
                    &s_c,
                    cfg.exploration_noise * self.agent.max_action(),
                    &mut self.rng,
                )
            };
            let res = env.step(&action)?;
            let next_s_c = augment(self.repr, &res.observation, t)?;
            // w = 0 never evaluates G, so it cannot influence the run
            let intrinsic = match self.reward {
                Some(g) if w != 0.0 => g
                    .eval(&next_s_c)
                    .map_err(|source| TrainError::Disqualified { step: t, source })?,
                _ => 0.0,
            };
            let combined = if w != 0.0 {
                res.reward + w * intrinsic
            } else {
                res.reward
            };
            self.replay.push(&Transition {
                s_c: std::mem::take(&mut s_c),
                action,
                combined_reward: combined,
                extrinsic_reward: res.reward,
                intrinsic_reward: intrinsic,
                next_s_c: next_s_c.clone(),
                done: res.terminated,
            });
            s_c = next_s_c;

            if t >= cfg.start_steps {
                let batch = self.replay.sample(cfg.batch_size, &mut self.rng);
                self.agent.update(&batch, &cfg, &mut self.rng);
            }

            if res.terminated || res.truncated {
                episode += 1;
                let obs = env.reset(derive_seed(cfg.seed, STREAM_TRAIN_EPISODE, episode));
                s_c = augment(self.repr, &obs, t)?;
            }

            let done_steps = t + 1;
            let at_grid = cfg.eval_every > 0 && done_steps % cfg.eval_every == 0;
            if at_grid && done_steps < cfg.total_steps {
                curve.push(self.curve_point(done_steps, &start)?.0);
            }
        }

        let (point, eval) = self.curve_point(cfg.total_steps, &start)?;
        curve.push(point);
        Ok(TrainResult {
            actor: self.agent.actor.clone(),
            critic1: self.agent.critic1.clone(),
            critic2: self.agent.critic2.clone(),
            score: eval.score,
            mean_return: eval.mean_return,
            success_rate: eval.success_rate,
            eval_traces: eval.traces,
            curve,
            init_fingerprint,
            episodes: episode as usize,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    fn curve_point(
        &self,
        step: usize,
        start: &Instant,
    ) -> Result<(CurvePoint, Evaluation), TrainError> {
        if !self.agent.is_finite() {
            return Err(TrainError::Diverged { step });
        }
        let eval = evaluate_at(
            &self.agent.actor,
            self.env_id,
            self.repr,
            self.cfg.eval_episodes,
            self.cfg.seed,
            step,
        )?;
        log::debug!(
            "step {step}: score {:.3}, success {:.2}",
            eval.score,
            eval.success_rate
        );
        let point = CurvePoint {
            step,
            score: eval.score,
            mean_return: eval.mean_return,
            success_rate: eval.success_rate,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        Ok((point, eval))
    }
}

/// Builds a [`Td3Trainer`] and runs it to completion.
pub fn train(
    env_id: EnvId,
    repr: Option<&ReprProgram>,
    reward: Option<&RewardProgram>,
    cfg: &TrainConfig,
) -> Result<TrainResult, TrainError> {
    Td3Trainer::new(env_id, repr, reward, cfg.clone())?.run()
}
