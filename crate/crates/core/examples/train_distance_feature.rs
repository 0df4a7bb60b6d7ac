//! Trains TD3 on the dense maze twice at the same seed: once on the raw
//! observation, once with the agent-target distance appended.
//!
//! ```text
//! cargo run --release --example train_distance_feature -- [seed] [steps] [hidden] [eval_every]
//! ```

use lesr::dsl::{parse_repr_program, parse_reward_program};
use lesr::env::EnvId;
use lesr::td3::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;
    let steps: usize = args.next().map_or(Ok(50_000), |s| s.parse())?;
    let hidden: usize = args.next().map_or(Ok(64), |s| s.parse())?;
    let eval_every: usize = args.next().map_or(Ok(5_000), |s| s.parse())?;

    let f = parse_repr_program("out: sqrt((s[0]-s[2])^2 + (s[1]-s[3])^2)", 4)?;
    let g = parse_reward_program("out: -s[4]", 4, 5)?;
    let cfg = TrainConfig {
        total_steps: steps,
        hidden: vec![hidden, hidden],
        eval_every,
        seed,
        ..TrainConfig::default()
    };

    for (label, repr, reward) in [("source", None, None), ("distance", Some(&f), Some(&g))] {
        let r = train(EnvId::PointMazeDense, repr, reward, &cfg)?;
        println!("== {label} (seed {seed}, {:.1}s)", r.wall_time_s);
        for p in &r.curve {
            println!(
                "  step {:>6}  return {:>9.2}  success {:.2}",
                p.step, p.mean_return, p.success_rate
            );
        }
        println!(
            "  area {:.1}  critic bound {:.3}",
            r.curve_area(),
            r.critic_spectral_bound()
        );
    }
    Ok(())
}
