//! Lipschitz arrays of a scripted trajectory under the reward, discounted
//! return and sparse reward signals.
//!
//! The distance column of the dense array is exactly 1 because the reward is
//! the negated distance.

use lesr::dsl::parse_repr_program;
use lesr::env::{EnvId, PointMaze};
use lesr::lipschitz::{trajectory_lipschitz_array, Trajectory};

fn rollout(id: EnvId, f: &lesr::dsl::ReprProgram) -> Trajectory {
    let mut env = PointMaze::new(id);
    let mut obs = env.reset(0);
    let (mut states, mut rewards) = (Vec::new(), Vec::new());
    for t in 0..200 {
        // a wobbly approach so every dimension varies
        let angle = (obs[3] - obs[1]).atan2(obs[2] - obs[0]) + 0.8 * (t as f64 * 0.3).sin();
        let step = env.step(&[angle.cos(), angle.sin()]).unwrap();
        states.push(f.augment(&step.observation).unwrap());
        rewards.push(step.reward);
        if step.done() {
            break;
        }
        obs = step.observation;
    }
    Trajectory::new(states, rewards).unwrap()
}

fn main() {
    let f = parse_repr_program("out: sqrt((s[0] - s[2])^2 + (s[1] - s[3])^2)", 4).unwrap();
    let dense = rollout(EnvId::PointMazeDense, &f);
    let sparse = rollout(EnvId::PointMazeSparse, &f);
    let names = ["ax", "ay", "tx", "ty", "distance"];
    let rows = [
        ("dense reward", trajectory_lipschitz_array(&dense)),
        (
            "dense return",
            trajectory_lipschitz_array(&dense.with_discounted_returns(0.99).unwrap()),
        ),
        ("sparse reward", trajectory_lipschitz_array(&sparse)),
        (
            "sparse return",
            trajectory_lipschitz_array(&sparse.with_discounted_returns(0.99).unwrap()),
        ),
    ];
    print!("{:<14}", "");
    names.iter().for_each(|n| print!("{n:>10}"));
    println!();
    for (label, a) in rows {
        print!("{label:<14}");
        a.values.iter().for_each(|v| print!("{v:>10.3}"));
        println!();
    }
}
