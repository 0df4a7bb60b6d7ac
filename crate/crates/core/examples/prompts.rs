//! Renders the three prompt templates with a fake iteration's results.

use lesr::env::EnvId;
use lesr::lipschitz::LipschitzArray;
use lesr::llm::{build_prompt, format_iteration_results, PromptVars, ResultEntry, TemplateId};

fn main() {
    let env = EnvId::PointMazeDense;
    let results = format_iteration_results(
        &[
            ResultEntry {
                label: "candidate 0".into(),
                repr_text: "out: sqrt((s[0] - s[2])^2 + (s[1] - s[3])^2)".into(),
                reward_text: "out: -s[4]".into(),
                score: Some(-112.5),
                lipschitz: Some(LipschitzArray {
                    values: vec![0.7, 0.8, 0.1, 0.1, 1.0],
                    trajectories_seen: 10,
                    approximate: false,
                }),
                note: None,
            },
            ResultEntry {
                label: "candidate 1".into(),
                repr_text: "out: exp(exp(s[0]))".into(),
                reward_text: "out: s[4]".into(),
                score: None,
                lipschitz: None,
                note: Some("evaluated to NaN".into()),
            },
        ],
        env.obs_dim(),
    );
    let vars = PromptVars {
        task_description: Some(env.task_description().into()),
        total_dim: Some(env.obs_dim()),
        detail_content: Some(env.dimension_details().into()),
        sample_count: Some(2),
        iteration_results: Some(results.clone()),
        former_history: Some(format!("Iteration 0:\n{results}")),
    };
    for t in [
        TemplateId::Initial,
        TemplateId::Feedback,
        TemplateId::Subsequent,
    ] {
        let p = build_prompt(t, &vars).unwrap();
        println!("========== {t:?}\n{}\n", p.user);
    }
}
