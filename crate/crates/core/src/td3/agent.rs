use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::replay::Batch;
use super::{derive_seed, TrainConfig};
use crate::nn::{mlp_init, AdamConfig, AdamState, Head, MlpParams, NnError};

const STREAM_ACTOR: u64 = 11;
const STREAM_CRITIC1: u64 = 12;
const STREAM_CRITIC2: u64 = 13;

/// Actor, twin critics, their targets and optimizers.
#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub actor: MlpParams,
    pub actor_target: MlpParams,
    pub critic1: MlpParams,
    pub critic2: MlpParams,
    pub critic1_target: MlpParams,
    pub critic2_target: MlpParams,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    state_dim: usize,
    action_dim: usize,
    max_action: f64,
    critic_updates: u64,
    actor_updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Set on the updates that also step the actor.
    pub actor_loss: Option<f64>,
}

impl Td3Agent {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        max_action: f64,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<Self, NnError> {
        let sizes = |input: usize, output: usize| {
            let mut v = vec![input];
            v.extend_from_slice(&cfg.hidden);
            v.push(output);
            v
        };
        let actor = mlp_init(
            &sizes(state_dim, action_dim),
            Head::TanhScaled { bound: max_action },
            derive_seed(seed, STREAM_ACTOR, 0),
        )?;
        let critic_sizes = sizes(state_dim + action_dim, 1);
        let critic1 = mlp_init(
            &critic_sizes,
            Head::Identity,
            derive_seed(seed, STREAM_CRITIC1, 0),
        )?;
        let critic2 = mlp_init(
            &critic_sizes,
            Head::Identity,
            derive_seed(seed, STREAM_CRITIC2, 0),
        )?;
        let actor_cfg = AdamConfig {
            lr: cfg.actor_lr,
            ..AdamConfig::default()
        };
        let critic_cfg = AdamConfig {
            lr: cfg.critic_lr,
            ..AdamConfig::default()
        };
        Ok(Td3Agent {
            actor_opt: AdamState::new(&actor, actor_cfg),
            critic1_opt: AdamState::new(&critic1, critic_cfg),
            critic2_opt: AdamState::new(&critic2, critic_cfg),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            state_dim,
            action_dim,
            max_action,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn max_action(&self) -> f64 {
        self.max_action
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic1.is_finite() && self.critic2.is_finite()
    }

    /// One TD3 update: both critics regress on the clipped double-Q target;
    /// every `policy_delay`-th call also steps the actor and all targets.
    pub fn update(&mut self, batch: &Batch, cfg: &TrainConfig, rng: &mut impl Rng) -> UpdateStats {
        let (n, d, a) = (batch.size, self.state_dim, self.action_dim);
        let states = ArrayView2::from_shape((n, d), &batch.states).expect("batch states");
        let actions = ArrayView2::from_shape((n, a), &batch.actions).expect("batch actions");
        let next_states =
            ArrayView2::from_shape((n, d), &batch.next_states).expect("batch next states");

        // target actions with clipped smoothing noise
        let mut next_actions = self.actor_target.forward_batch(next_states).output;
        let noise = Normal::new(0.0, cfg.policy_noise * self.max_action).expect("finite std");
        let clip = cfg.noise_clip * self.max_action;
        next_actions.mapv_inplace(|v| {
            let eps = noise.sample(rng).clamp(-clip, clip);
            (v + eps).clamp(-self.max_action, self.max_action)
        });
        let next_sa = concat(next_states, next_actions.view());
        let q1_next = self.critic1_target.forward_batch(next_sa.view()).output;
        let q2_next = self.critic2_target.forward_batch(next_sa.view()).output;
        let targets: Vec<f64> = (0..n)
            .map(|i| {
                let q = q1_next[[i, 0]].min(q2_next[[i, 0]]);
                batch.rewards[i] + cfg.gamma * batch.not_done[i] * q
            })
            .collect();

        let sa = concat(states, actions);
        let l1 = critic_step(
            &mut self.critic1,
            &mut self.critic1_opt,
            sa.view(),
            &targets,
        );
        let l2 = critic_step(
            &mut self.critic2,
            &mut self.critic2_opt,
            sa.view(),
            &targets,
        );
        self.critic_updates += 1;

        let mut actor_loss = None;
        if self.critic_updates.is_multiple_of(cfg.policy_delay as u64) {
            actor_loss = Some(self.actor_step(states));
            self.actor_updates += 1;
            self.actor_target.soft_update_from(&self.actor, cfg.rho);
            self.critic1_target.soft_update_from(&self.critic1, cfg.rho);
            self.critic2_target.soft_update_from(&self.critic2, cfg.rho);
        }
        UpdateStats {
            critic_loss: l1 + l2,
            actor_loss,
        }
    }

    /// Ascends `mean Q1(s, pi(s))`.
    fn actor_step(&mut self, states: ArrayView2<f64>) -> f64 {
        let n = states.nrows();
        let d = self.state_dim;
        let actor_cache = self.actor.forward_batch(states);
        let sa = concat(states, actor_cache.output.view());
        let q_cache = self.critic1.forward_batch(sa.view());
        let loss = -q_cache.output.mean().unwrap_or(0.0);
        let upstream = Array2::from_elem((n, 1), -1.0 / n as f64);
        let (_, input_grad) = self.critic1.backward_batch(&q_cache, upstream.view());
        let action_grad = input_grad.slice(s![.., d..]);
        let (grads, _) = self.actor.backward_batch(&actor_cache, action_grad);
        self.actor_opt.step(&mut self.actor, &grads);
        loss
    }
}

/// Mean-squared-error step towards `targets`; returns the loss.
fn critic_step(
    critic: &mut MlpParams,
    opt: &mut AdamState,
    inputs: ArrayView2<f64>,
    targets: &[f64],
) -> f64 {
    let n = targets.len() as f64;
    let cache = critic.forward_batch(inputs);
    let mut upstream = Array2::zeros((targets.len(), 1));
    let mut loss = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        let err = cache.output[[i, 0]] - y;
        loss += err * err;
        upstream[[i, 0]] = 2.0 * err / n;
    }
    let (grads, _) = critic.backward_batch(&cache, upstream.view());
    opt.step(critic, &grads);
    loss / n
}

fn concat(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), a.ncols() + b.ncols()));
    out.slice_mut(s![.., ..a.ncols()]).assign(&a);
    out.slice_mut(s![.., a.ncols()..]).assign(&b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::td3::ReplayBuffer;
    use crate::td3::Transition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            hidden: vec![8, 8],
            batch_size: 16,
            policy_delay: 3,
            ..TrainConfig::default()
        }
    }

    fn filled_buffer() -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(3, 2, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..40 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let next: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = rng.random_range(-1.0..1.0);
            buf.push(&Transition {
                s_c: s,
                action: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                combined_reward: r,
                extrinsic_reward: r,
                intrinsic_reward: 0.0,
                next_s_c: next,
                done: false,
            });
        }
        buf
    }

    #[test]
    fn actor_updates_follow_policy_delay() {
        let cfg = small_cfg();
        let mut agent = Td3Agent::new(3, 2, 1.0, &cfg, 0).unwrap();
        let buf = filled_buffer();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut actor_steps = 0;
        for i in 1..=9 {
            let before = agent.actor.clone();
            let stats = agent.update(&buf.sample(cfg.batch_size, &mut rng), &cfg, &mut rng);
            let stepped = i % 3 == 0;
            assert_eq!(stats.actor_loss.is_some(), stepped);
            assert_eq!(agent.actor != before, stepped);
            actor_steps += usize::from(stepped);
        }
        assert_eq!(agent.actor_updates(), actor_steps as u64);
        assert_eq!(agent.critic_updates(), 9);
    }

    #[test]
    fn critic_regression_reduces_loss() {
        let cfg = TrainConfig {
            gamma: 0.0,
            critic_lr: 1e-2,
            ..small_cfg()
        };
        let mut agent = Td3Agent::new(3, 2, 1.0, &cfg, 3).unwrap();
        let buf = filled_buffer();
        let idx: Vec<usize> = (0..buf.len()).collect();
        let batch = buf.gather(&idx);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let first = agent.update(&batch, &cfg, &mut rng).critic_loss;
        let mut last = first;
        for _ in 0..300 {
            last = agent.update(&batch, &cfg, &mut rng).critic_loss;
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn same_seed_same_networks() {
        let cfg = small_cfg();
        let a = Td3Agent::new(3, 2, 1.0, &cfg, 7).unwrap();
        let b = Td3Agent::new(3, 2, 1.0, &cfg, 7).unwrap();
        let c = Td3Agent::new(3, 2, 1.0, &cfg, 8).unwrap();
        assert_eq!(a.actor, b.actor);
        assert_eq!(a.critic2, b.critic2);
        assert_ne!(a.actor, c.actor);
        assert_ne!(a.critic1, a.critic2);
    }
}
