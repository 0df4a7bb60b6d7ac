//! Spectral-norm Lipschitz bounds of a random critic, checked against the
//! largest difference quotient found by sampling.

use lesr::nn::{input_lipschitz_bounds, mlp_init, value_lipschitz_bound, Head};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let net = mlp_init(&[6, 64, 64, 1], Head::Identity, 1).unwrap();
    let bound = value_lipschitz_bound(&net);
    let per_input = input_lipschitz_bounds(&net);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut best = 0.0f64;
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dist = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        best = best.max((net.forward(&x)[0] - net.forward(&y)[0]).abs() / dist);
    }
    println!("product of layer norms  {bound:.4}");
    println!("sampled quotient max    {best:.4}");
    println!("per-input bounds        {per_input:.3?}");
}
