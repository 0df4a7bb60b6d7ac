mod common;

use common::*;
use lesr::lipschitz::{
    corollary_b6_bound, discounted_return_series, soft_update, trajectory_lipschitz_array,
    value_lipschitz_partial_sum, LipschitzAccumulator, LipschitzArray, LipschitzOptions,
    Trajectory,
};
use rand::Rng;

fn array(values: Vec<f64>) -> LipschitzArray {
    LipschitzArray {
        values,
        trajectories_seen: 1,
        approximate: false,
    }
}

#[test]
fn exact_array_matches_brute_force() {
    let mut rng = rng(1);
    for _ in 0..100 {
        let (h, d) = (rng.random_range(2..=40), rng.random_range(1..=6));
        let (states, rewards) = random_trajectory(&mut rng, h, d);
        let expected = brute_force_lipschitz(&states, &rewards);
        let got = trajectory_lipschitz_array(&Trajectory::new(states, rewards).unwrap());
        assert_eq!(got.values, expected);
    }
}

#[test]
fn scaling_rewards_scales_the_array() {
    let mut rng = rng(2);
    let (states, rewards) = random_trajectory(&mut rng, 30, 3);
    let base =
        trajectory_lipschitz_array(&Trajectory::new(states.clone(), rewards.clone()).unwrap());
    let scaled: Vec<f64> = rewards.iter().map(|r| 4.0 * r).collect();
    let got = trajectory_lipschitz_array(&Trajectory::new(states.clone(), scaled).unwrap());
    for (a, b) in got.values.iter().zip(&base.values) {
        assert!((a - 4.0 * b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    // stretching a state dimension by 2 halves its entry
    let stretched: Vec<Vec<f64>> = states
        .iter()
        .map(|s| vec![2.0 * s[0], s[1], s[2]])
        .collect();
    let got = trajectory_lipschitz_array(&Trajectory::new(stretched, rewards).unwrap());
    assert!((got.values[0] - base.values[0] / 2.0).abs() <= 1e-12 * base.values[0].max(1.0));
    assert_eq!(got.values[1..], base.values[1..]);
}

#[test]
fn appending_steps_never_lowers_the_array() {
    let mut rng = rng(3);
    let (states, rewards) = random_trajectory(&mut rng, 40, 4);
    let mut prev = vec![0.0; 4];
    for h in 2..=40 {
        let t = Trajectory::new(states[..h].to_vec(), rewards[..h].to_vec()).unwrap();
        let cur = trajectory_lipschitz_array(&t).values;
        assert!(cur.iter().zip(&prev).all(|(c, p)| c >= p));
        prev = cur;
    }
}

#[test]
fn constant_rewards_give_zeros() {
    let mut rng = rng(4);
    let (states, _) = random_trajectory(&mut rng, 20, 3);
    let t = Trajectory::new(states, vec![1.5; 20]).unwrap();
    assert_eq!(trajectory_lipschitz_array(&t).values, vec![0.0; 3]);
}

#[test]
fn soft_update_algebra() {
    let mut rng = rng(5);
    for _ in 0..200 {
        let d = rng.random_range(1..8);
        let c: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..10.0)).collect();
        let t: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..10.0)).collect();
        let tau = rng.random_range(0.0..=1.0);
        let got = soft_update(&array(c.clone()), &array(t.clone()), tau).unwrap();
        for i in 0..d {
            assert!((got.values[i] - (tau * c[i] + (1.0 - tau) * t[i])).abs() <= 1e-12);
        }
        assert_eq!(
            soft_update(&array(c.clone()), &array(t.clone()), 1.0)
                .unwrap()
                .values,
            c
        );
        assert_eq!(
            soft_update(&array(c.clone()), &array(t.clone()), 0.0)
                .unwrap()
                .values,
            t
        );
    }
    assert!(soft_update(&array(vec![1.0]), &array(vec![1.0, 2.0]), 0.5).is_err());
    assert!(soft_update(&array(vec![1.0]), &array(vec![1.0]), 1.5).is_err());
}

#[test]
fn accumulator_starts_from_first_trajectory() {
    let mut rng = rng(6);
    let (s1, r1) = random_trajectory(&mut rng, 10, 2);
    let (s2, r2) = random_trajectory(&mut rng, 10, 2);
    let (t1, t2) = (
        Trajectory::new(s1, r1).unwrap(),
        Trajectory::new(s2, r2).unwrap(),
    );
    let mut acc = LipschitzAccumulator::new(0.9, LipschitzOptions::default()).unwrap();
    acc.push(&t1).unwrap();
    acc.push(&t2).unwrap();
    let got = acc.finish().unwrap();
    let (c1, c2) = (
        trajectory_lipschitz_array(&t1),
        trajectory_lipschitz_array(&t2),
    );
    for i in 0..2 {
        assert!((got.values[i] - (0.9 * c1.values[i] + 0.1 * c2.values[i])).abs() < 1e-12);
    }
    assert_eq!(got.trajectories_seen, 2);
}

#[test]
fn discounted_returns_match_direct_sums() {
    let mut rng = rng(7);
    let rewards: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gamma = 0.95;
    let got = discounted_return_series(&rewards, gamma).unwrap();
    for t in 0..rewards.len() {
        let direct: f64 = rewards[t..]
            .iter()
            .enumerate()
            .map(|(j, r)| gamma.powi(j as i32) * r)
            .sum();
        assert!((got[t] - direct).abs() < 1e-12);
    }
}

#[test]
fn value_lipschitz_stays_under_closed_form_bound() {
    let mut rng = rng(8);
    for &k1 in &[0.5, 1.0, 3.0] {
        for &k2 in &[0.0, 0.5, 0.9, 1.1, 2.0] {
            for &gamma in &[0.0, 0.5, 0.9, 0.99] {
                for &h in &[1u32, 5, 20] {
                    let sum = value_lipschitz_partial_sum(k1, k2, gamma, h);
                    // gamma * K2 = 1 has no closed form; the partial sum covers it
                    let bound = match corollary_b6_bound(k1, k2, gamma, h) {
                        Ok(b) => {
                            assert!((b - sum).abs() <= 1e-9 * sum.max(1.0));
                            b
                        }
                        Err(_) => {
                            assert!((gamma * k2 - 1.0).abs() < 1e-12);
                            sum
                        }
                    };
                    let emp = sampled_value_lipschitz(&mut rng, k1, k2, gamma, h, 200);
                    assert!(
                        emp <= bound * (1.0 + 1e-12),
                        "{k1} {k2} {gamma} {h}: {emp} > {bound}"
                    );
                }
            }
        }
        assert_eq!(corollary_b6_bound(k1, 0.0, 0.9, 10).unwrap(), k1);
        assert_eq!(corollary_b6_bound(k1, 1.5, 0.0, 10).unwrap(), k1);
    }
}
