//! Per-dimension Lipschitz feedback.
//!
//! For a trajectory of augmented states `s^c_t` and rewards `r_t`, element `i`
//! of the Lipschitz array is the largest slope `|r_a - r_b| / |s^c_a[i] - s^c_b[i]|`
//! over all step pairs. Arrays from successive trajectories are blended with
//! [`soft_update`]. Two substitutes cover discontinuous rewards: suffix
//! discounted returns in place of rewards ([`discounted_return_series`]) and
//! the spectral-norm product of a trained critic (see [`crate::nn::value_lipschitz_bound`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pairs whose state difference is below this are skipped.
pub const MIN_STATE_GAP: f64 = 1e-8;
/// Default soft-update weight.
pub const DEFAULT_TAU: f64 = 0.9;
/// Trajectories longer than this are estimated from sampled pairs.
pub const DEFAULT_EXACT_MAX_LEN: usize = 2000;
pub const DEFAULT_SAMPLED_PAIRS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LipschitzError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("a trajectory needs at least 2 steps, got {0}")]
    TooShort(usize),
    #[error("step {step} has {actual} state dimensions, expected {expected}")]
    RaggedStates {
        step: usize,
        expected: usize,
        actual: usize,
    },
    #[error("soft-update weight {0} is outside [0, 1]")]
    BadTau(f64),
    #[error("discount {0} is outside [0, 1)")]
    BadGamma(f64),
    #[error(
        "closed-form bound is singular at gamma*K2 = 1; use value_lipschitz_partial_sum, which equals H*K1 there"
    )]
    SingularBound,
    #[error("K1 and K2 must be non-negative, got K1={k1}, K2={k2}")]
    NegativeConstant { k1: f64, k2: f64 },
}

/// Which Lipschitz signal is reported back to the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackVariant {
    /// Per-dimension Lipschitz constants against extrinsic rewards.
    #[default]
    Reward,
    /// Per-dimension Lipschitz constants against suffix discounted returns.
    DiscountedReturn,
    /// Product of critic weight spectral norms (one value, min over twin critics).
    SpectralNorm,
}

impl FeedbackVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackVariant::Reward => "reward",
            FeedbackVariant::DiscountedReturn => "discounted_return",
            FeedbackVariant::SpectralNorm => "spectral_norm",
        }
    }
}

/// `sup_{a != b} |ys[a] - ys[b]| / |xs[a] - xs[b]|`, skipping pairs with
/// `|xs[a] - xs[b]| < MIN_STATE_GAP`. Returns 0 when every pair is skipped.
pub fn pairwise_lipschitz(xs: &[f64], ys: &[f64]) -> Result<f64, LipschitzError> {
    if xs.len() != ys.len() {
        return Err(LipschitzError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(LipschitzError::TooShort(xs.len()));
    }
    Ok(max_slope_exact(xs, ys))
}

fn max_slope_exact(xs: &[f64], ys: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for a in 0..xs.len() {
        let (xa, ya) = (xs[a], ys[a]);
        for b in (a + 1)..xs.len() {
            let dx = (xa - xs[b]).abs();
            if dx < MIN_STATE_GAP {
                continue;
            }
            let slope = (ya - ys[b]).abs() / dx;
            if slope > best {
                best = slope;
            }
        }
    }
    best
}

fn max_slope_sampled(xs: &[f64], ys: &[f64], pairs: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = xs.len();
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let dx = (xs[a] - xs[b]).abs();
        if dx < MIN_STATE_GAP {
            continue;
        }
        best = best.max((ys[a] - ys[b]).abs() / dx);
    }
    best
}

/// Augmented states paired with the reward (or return) observed at them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
    rewards: Vec<f64>,
}

impl Trajectory {
    pub fn new(states: Vec<Vec<f64>>, rewards: Vec<f64>) -> Result<Self, LipschitzError> {
        if states.len() != rewards.len() {
            return Err(LipschitzError::LengthMismatch {
                left: states.len(),
                right: rewards.len(),
            });
        }
        if states.len() < 2 {
            return Err(LipschitzError::TooShort(states.len()));
        }
        let dim = states[0].len();
        if let Some((step, s)) = states.iter().enumerate().find(|(_, s)| s.len() != dim) {
            return Err(LipschitzError::RaggedStates {
                step,
                expected: dim,
                actual: s.len(),
            });
        }
        Ok(Trajectory { states, rewards })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Series of dimension `i` across the trajectory.
    pub fn dimension(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    /// Same states with rewards replaced by suffix discounted returns.
    pub fn with_discounted_returns(&self, gamma: f64) -> Result<Trajectory, LipschitzError> {
        Ok(Trajectory {
            states: self.states.clone(),
            rewards: discounted_return_series(&self.rewards, gamma)?,
        })
    }
}

/// Per-dimension Lipschitz estimates, soft-updated across trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzArray {
    pub values: Vec<f64>,
    pub trajectories_seen: usize,
    /// True when any contributing trajectory was estimated from sampled pairs.
    pub approximate: bool,
}

impl LipschitzArray {
    pub fn empty(dim: usize) -> Self {
        LipschitzArray {
            values: vec![0.0; dim],
            trajectories_seen: 0,
            approximate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    /// Min-max normalized copy in `[0, 1]`; all zeros when every value is equal.
    pub fn normalized(&self) -> Vec<f64> {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        self.values
            .iter()
            .map(|v| if range > 0.0 { (v - lo) / range } else { 0.0 })
            .collect()
    }

    /// CSV with header `dim,value,flag`; flag is `exact` or `approximate`.
    pub fn to_csv(&self) -> String {
        let flag = if self.approximate {
            "approximate"
        } else {
            "exact"
        };
        let mut out = String::from("dim,value,flag\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v},{flag}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzOptions {
    pub exact_max_len: usize,
    pub sampled_pairs: usize,
    pub seed: u64,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        LipschitzOptions {
            exact_max_len: DEFAULT_EXACT_MAX_LEN,
            sampled_pairs: DEFAULT_SAMPLED_PAIRS,
            seed: 0,
        }
    }
}

/// Exact per-dimension array of one trajectory.
pub fn trajectory_lipschitz_array(t: &Trajectory) -> LipschitzArray {
    trajectory_lipschitz_array_with(t, &LipschitzOptions::default())
}

pub fn trajectory_lipschitz_array_with(t: &Trajectory, opts: &LipschitzOptions) -> LipschitzArray {
    let approximate = t.len() > opts.exact_max_len;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let values = (0..t.state_dim())
        .map(|i| {
            let xs = t.dimension(i);
            if approximate {
                max_slope_sampled(&xs, &t.rewards, opts.sampled_pairs, &mut rng)
            } else {
                max_slope_exact(&xs, &t.rewards)
            }
        })
        .collect();
    LipschitzArray {
        values,
        trajectories_seen: 1,
        approximate,
    }
}

/// `tau * C + (1 - tau) * C_T`. An array that has seen no trajectory is
/// replaced by `C_T`.
pub fn soft_update(
    current: &LipschitzArray,
    latest: &LipschitzArray,
    tau: f64,
) -> Result<LipschitzArray, LipschitzError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(LipschitzError::BadTau(tau));
    }
    if current.len() != latest.len() {
        return Err(LipschitzError::LengthMismatch {
            left: current.len(),
            right: latest.len(),
        });
    }
    if current.trajectories_seen == 0 {
        return Ok(LipschitzArray {
            values: latest.values.clone(),
            trajectories_seen: latest.trajectories_seen.max(1),
            approximate: latest.approximate,
        });
    }
    let values = current
        .values
        .iter()
        .zip(&latest.values)
        .map(|(c, t)| tau * c + (1.0 - tau) * t)
        .collect();
    Ok(LipschitzArray {
        values,
        trajectories_seen: current.trajectories_seen + latest.trajectories_seen.max(1),
        approximate: current.approximate || latest.approximate,
    })
}

/// Running soft-updated array over a stream of trajectories.
#[derive(Debug, Clone)]
pub struct LipschitzAccumulator {
    tau: f64,
    opts: LipschitzOptions,
    array: Option<LipschitzArray>,
}

impl LipschitzAccumulator {
    pub fn new(tau: f64, opts: LipschitzOptions) -> Result<Self, LipschitzError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(LipschitzError::BadTau(tau));
        }
        Ok(LipschitzAccumulator {
            tau,
            opts,
            array: None,
        })
    }

    pub fn push(&mut self, t: &Trajectory) -> Result<(), LipschitzError> {
        let latest = trajectory_lipschitz_array_with(t, &self.opts);
        let next = match &self.array {
            None => latest,
            Some(current) => soft_update(current, &latest, self.tau)?,
        };
        self.array = Some(next);
        Ok(())
    }

    pub fn finish(self) -> Option<LipschitzArray> {
        self.array
    }
}

/// `out[t] = sum_{j >= t} gamma^(j - t) * rewards[j]`.
pub fn discounted_return_series(rewards: &[f64], gamma: f64) -> Result<Vec<f64>, LipschitzError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(LipschitzError::BadGamma(gamma));
    }
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    Ok(out)
}

/// Closed-form bound `[1 - (gamma*K2)^H] * K1 / (1 - gamma*K2)` on the value
/// Lipschitz constant of an `H`-step deterministic rollout whose reward is
/// `K1`-Lipschitz and whose dynamics are `K2`-Lipschitz.
pub fn corollary_b6_bound(
    k1: f64,
    k2: f64,
    gamma: f64,
    horizon: u32,
) -> Result<f64, LipschitzError> {
    if k1 < 0.0 || k2 < 0.0 {
        return Err(LipschitzError::NegativeConstant { k1, k2 });
    }
    let q = gamma * k2;
    if (1.0 - q).abs() < 1e-12 {
        return Err(LipschitzError::SingularBound);
    }
    Ok((1.0 - q.powi(horizon as i32)) * k1 / (1.0 - q))
}

/// `sum_{t=0}^{H-1} (gamma*K2)^t * K1`, defined everywhere including `gamma*K2 = 1`.
pub fn value_lipschitz_partial_sum(k1: f64, k2: f64, gamma: f64, horizon: u32) -> f64 {
    let q = gamma * k2;
    let mut term = k1;
    let mut sum = 0.0;
    for _ in 0..horizon {
        sum += term;
        term *= q;
    }
    sum
}
