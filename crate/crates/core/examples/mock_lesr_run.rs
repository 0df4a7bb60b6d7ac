//! A complete offline search with the mock generator, then a summary of
//! every candidate.
//!
//! ```text
//! cargo run --release --example mock_lesr_run -- [out_dir]
//! ```

use lesr::config::RunConfig;
use lesr::llm::MockGenerator;
use lesr::orchestrator::run_lesr;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig {
        small_steps: 5_000,
        final_steps: 10_000,
        hidden: vec![64, 64],
        start_steps: 1_000,
        eval_every: 2_500,
        out_dir: std::env::args()
            .nth(1)
            .unwrap_or_else(|| "runs/mock".into())
            .into(),
        ..RunConfig::default()
    };
    let mut generator = MockGenerator::new(cfg.seed);
    let manifest = run_lesr(&cfg, &mut generator)?;
    for it in &manifest.iterations {
        println!(
            "iteration {} ({} rejected responses)",
            it.iteration,
            it.rejections.len()
        );
        for c in &it.candidates {
            let first = c.repr_text.lines().next().unwrap_or("");
            match (&c.disqualified, c.score) {
                (Some(reason), _) => println!("  #{} {first:<48} disqualified: {reason}", c.id),
                (None, Some(s)) => println!(
                    "  #{} {first:<48} score {s:>9.2}  mean C {:.3}",
                    c.id,
                    c.mean_lipschitz()
                ),
                (None, None) => println!("  #{} {first}", c.id),
            }
        }
    }
    let best = manifest.best.expect("best candidate");
    let fin = manifest.final_result.as_ref().expect("final training");
    println!(
        "best: iteration {} candidate {}; final score {:.2}, success {:.2}",
        best.iteration, best.id, fin.score, fin.success_rate
    );
    println!("run directory: {}", cfg.out_dir.display());
    Ok(())
}
