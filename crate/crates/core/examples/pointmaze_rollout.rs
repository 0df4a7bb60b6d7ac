//! Drives the point mass straight at the target and prints the rollout.

use lesr::env::{EnvId, PointMaze};

fn main() {
    let mut env = PointMaze::new(EnvId::PointMazeDense);
    let mut obs = env.reset(3);
    let mut total = 0.0;
    loop {
        let (dx, dy) = (obs[2] - obs[0], obs[3] - obs[1]);
        let norm = dx.hypot(dy).max(1e-9);
        let step = env.step(&[dx / norm, dy / norm]).expect("valid action");
        total += step.reward;
        let t = env.state().step_count;
        if t.is_multiple_of(10) || step.done() {
            println!(
                "t {t:>3}  pos ({:.2}, {:.2})  distance {:.3}  reward {:.3}",
                step.observation[0],
                step.observation[1],
                env.distance(),
                step.reward
            );
        }
        if step.done() {
            println!("terminated {}  return {total:.2}", step.terminated);
            break;
        }
        obs = step.observation;
    }
}
