//! Largest singular value by power iteration on `W^T W`.

use ndarray::{Array1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::MlpParams;

pub const SPECTRAL_MAX_ITERS: usize = 100;
pub const SPECTRAL_TOL: f64 = 1e-8;
const DEFAULT_SEED: u64 = 0x5eed;

/// `||W||_2` with the default start-vector seed.
pub fn spectral_norm(w: ArrayView2<f64>, max_iters: usize, tol: f64) -> f64 {
    spectral_norm_seeded(w, max_iters, tol, DEFAULT_SEED)
}

/// `||W||_2` by power iteration from a seeded random unit vector.
///
/// Each iterate `v` is a unit vector and the estimate is `||W v||`, which
/// never exceeds the true norm. Iteration stops once successive estimates
/// differ by less than `tol`.
pub fn spectral_norm_seeded(w: ArrayView2<f64>, max_iters: usize, tol: f64, seed: u64) -> f64 {
    let n = w.ncols();
    if n == 0 || w.nrows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Array1<f64> = Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut rng));
    let norm = v.dot(&v).sqrt();
    v /= norm;

    let mut prev = f64::NAN;
    let mut sigma = 0.0;
    for _ in 0..max_iters.max(1) {
        let u = w.dot(&v);
        sigma = u.dot(&u).sqrt();
        if (sigma - prev).abs() < tol {
            break;
        }
        let y = w.t().dot(&u);
        let y_norm = y.dot(&y).sqrt();
        if y_norm == 0.0 {
            return sigma;
        }
        v = y / y_norm;
        prev = sigma;
    }
    sigma
}

/// `prod_i ||W_i||_2`, an upper bound on the network's Lipschitz constant
/// when every activation is 1-Lipschitz (ReLU, tanh).
///
/// A `bound * tanh` head multiplies the bound by `bound`.
pub fn value_lipschitz_bound(p: &MlpParams) -> f64 {
    let product: f64 = p
        .layers
        .iter()
        .map(|l| spectral_norm(l.weight.view(), SPECTRAL_MAX_ITERS, SPECTRAL_TOL))
        .product();
    match p.head {
        super::Head::Identity => product,
        super::Head::TanhScaled { bound } => product * bound.abs(),
    }
}

/// Per-input refinement of [`value_lipschitz_bound`]: entry `i` bounds the
/// network's Lipschitz constant along input coordinate `i` alone, using the
/// norm of column `i` of the first weight matrix in place of `||W_1||_2`.
pub fn input_lipschitz_bounds(p: &MlpParams) -> Vec<f64> {
    let rest: f64 = p.layers[1..]
        .iter()
        .map(|l| spectral_norm(l.weight.view(), SPECTRAL_MAX_ITERS, SPECTRAL_TOL))
        .product();
    let scale = match p.head {
        super::Head::Identity => rest,
        super::Head::TanhScaled { bound } => rest * bound.abs(),
    };
    p.layers[0]
        .weight
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt() * scale)
        .collect()
}
