//! Independent reference implementations used by the integration and
//! acceptance tests.
#![allow(dead_code)]

use lesr::nn::{mlp_init, Head, MlpParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct O(H^2) max slope per dimension, written from the definition.
pub fn brute_force_lipschitz(states: &[Vec<f64>], rewards: &[f64]) -> Vec<f64> {
    let dim = states[0].len();
    let mut out = vec![0.0f64; dim];
    for (i, c) in out.iter_mut().enumerate() {
        for a in 0..states.len() {
            for b in 0..states.len() {
                if a == b {
                    continue;
                }
                let dx = (states[a][i] - states[b][i]).abs();
                if dx < lesr::lipschitz::MIN_STATE_GAP {
                    continue;
                }
                let slope = (rewards[a] - rewards[b]).abs() / dx;
                if slope > *c {
                    *c = slope;
                }
            }
        }
    }
    out
}

pub fn random_trajectory(rng: &mut impl Rng, len: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let states = (0..len)
        .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    let rewards = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
    (states, rewards)
}

/// Largest singular value from a full SVD.
pub fn svd_spectral_norm(w: &ndarray::Array2<f64>) -> f64 {
    let m = nalgebra::DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| w[[i, j]]);
    m.singular_values().max()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub fn random_mlp(rng: &mut impl Rng, max_width: usize, head: Head) -> MlpParams {
    let depth = rng.random_range(2..=4);
    let sizes: Vec<usize> = (0..depth)
        .map(|_| rng.random_range(1..=max_width))
        .collect();
    mlp_init(&sizes, head, rng.random()).unwrap()
}

/// All parameters in layer order: weights row-major, then biases.
pub fn flatten(p: &MlpParams) -> Vec<f64> {
    let mut out = Vec::new();
    for l in &p.layers {
        out.extend(l.weight.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

pub fn with_param(p: &MlpParams, index: usize, value: f64) -> MlpParams {
    let mut q = p.clone();
    let mut k = index;
    for l in &mut q.layers {
        let nw = l.weight.len();
        if k < nw {
            let cols = l.weight.ncols();
            l.weight[[k / cols, k % cols]] = value;
            return q;
        }
        k -= nw;
        if k < l.bias.len() {
            l.bias[k] = value;
            return q;
        }
        k -= l.bias.len();
    }
    panic!("parameter index out of range");
}

/// Central-difference gradient of `upstream . f(x)` against backprop.
/// Returns the largest relative error over all parameters, with an absolute
/// floor so that vanishing gradients do not dominate.
pub fn gradient_check(p: &MlpParams, x: &[f64], upstream: &[f64]) -> f64 {
    let objective =
        |q: &MlpParams| -> f64 { q.forward(x).iter().zip(upstream).map(|(a, b)| a * b).sum() };
    let analytic = flatten(&p.backward(x, upstream));
    let params = flatten(p);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (k, &v) in params.iter().enumerate() {
        let numeric =
            (objective(&with_param(p, k, v + h)) - objective(&with_param(p, k, v - h))) / (2.0 * h);
        let err = (numeric - analytic[k]).abs() / analytic[k].abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(err);
    }
    worst
}

/// False when a hidden pre-activation at `x` lies within `margin` of a ReLU
/// kink, where finite differences would straddle two linear pieces.
pub fn away_from_kinks(p: &MlpParams, x: &[f64], margin: f64) -> bool {
    let mut a = x.to_vec();
    for (i, l) in p.layers.iter().enumerate() {
        let pre: Vec<f64> = (0..l.weight.nrows())
            .map(|r| {
                l.weight
                    .row(r)
                    .iter()
                    .zip(&a)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
                    + l.bias[r]
            })
            .collect();
        if i + 1 < p.layers.len() {
            if pre.iter().any(|z| z.abs() < margin) {
                return false;
            }
            a = pre.into_iter().map(|z| z.max(0.0)).collect();
        }
    }
    true
}

/// Value of the start state `s0` in the deterministic linear MDP
/// `s' = k2 * s`, `r = k1 * s` over `horizon` steps.
pub fn linear_mdp_value(s0: f64, k1: f64, k2: f64, gamma: f64, horizon: u32) -> f64 {
    let (mut s, mut g, mut v) = (s0, 1.0, 0.0);
    for _ in 0..horizon {
        v += g * k1 * s;
        s *= k2;
        g *= gamma;
    }
    v
}

/// Largest difference quotient of the value over random start-state pairs at
/// least 1 apart, so rounding in the values is not amplified by the division.
pub fn sampled_value_lipschitz(
    rng: &mut impl Rng,
    k1: f64,
    k2: f64,
    gamma: f64,
    horizon: u32,
    pairs: usize,
) -> f64 {
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let a: f64 = rng.random_range(-10.0..10.0);
        let b: f64 = rng.random_range(-10.0..10.0);
        if (a - b).abs() < 1.0 {
            continue;
        }
        let q = (linear_mdp_value(a, k1, k2, gamma, horizon)
            - linear_mdp_value(b, k1, k2, gamma, horizon))
        .abs()
            / (a - b).abs();
        best = best.max(q);
    }
    best
}
