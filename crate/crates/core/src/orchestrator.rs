//! The search loop: sample K candidates, train each for `N_small` steps,
//! score them by return and Lipschitz feedback, feed the results back, repeat
//! `I` times, then train the best candidate from scratch for `N` steps.
//!
//! Run directory layout:
//!
//! ```text
//! manifest.json
//! iter_<i>/prompt.txt, feedback_prompt.txt, analysis.txt, rejected_<slot>_<attempt>.txt
//! iter_<i>/candidate_<k>/program.dsl, response.txt, train_curve.csv, trajectories.csv, lipschitz.csv
//! final/program.dsl, policy.bin, eval.csv, trajectories.csv
//! ```

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::lipschitz::{
    FeedbackVariant, LipschitzAccumulator, LipschitzArray, LipschitzError, LipschitzOptions,
};
use crate::llm::{
    build_prompt, format_iteration_results, format_program_pair, generate_candidates, Candidate,
    GenerationError, Generator, GeneratorError, PromptBundle, PromptVars, Provenance, Rejection,
    ResultEntry, TemplateId,
};
use crate::nn::input_lipschitz_bounds;
use crate::td3::{curve_to_csv, derive_seed, train, CurvePoint, TrainError, TrainResult};
use crate::trajectory::traces_to_csv;

const STREAM_CANDIDATE: u64 = 20;
const STREAM_FINAL: u64 = 21;

/// Rule recorded in every manifest.
pub const SELECTION_RULE: &str =
    "max score; ties: smaller mean Lipschitz constant, then earlier iteration, then lower id";

/// Identifies a candidate across the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRef {
    pub iteration: usize,
    pub id: usize,
}

/// Outcome of one candidate's training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub iteration: usize,
    pub id: usize,
    pub repr_text: String,
    pub reward_text: String,
    pub provenance: Provenance,
    pub added_dims: usize,
    /// `nu`; `None` when disqualified.
    pub score: Option<f64>,
    pub mean_return: Option<f64>,
    pub success_rate: Option<f64>,
    pub lipschitz: Option<LipschitzArray>,
    /// Smaller of the twin critics' spectral-norm products.
    pub critic_bound: Option<f64>,
    pub init_fingerprint: Option<u64>,
    pub disqualified: Option<String>,
    pub wall_time_s: f64,
}

impl CandidateRecord {
    pub fn reference(&self) -> CandidateRef {
        CandidateRef {
            iteration: self.iteration,
            id: self.id,
        }
    }

    pub fn is_eligible(&self) -> bool {
        self.disqualified.is_none() && self.score.is_some_and(f64::is_finite)
    }

    pub fn mean_lipschitz(&self) -> f64 {
        self.lipschitz
            .as_ref()
            .map_or(f64::INFINITY, LipschitzArray::mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub prompt_template: TemplateId,
    pub prompt: String,
    pub candidates: Vec<CandidateRecord>,
    pub rejections: Vec<Rejection>,
    pub feedback_prompt: String,
    pub analysis: String,
    /// Set when no candidate of this iteration is eligible.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub candidate: CandidateRef,
    pub steps: usize,
    pub seed: u64,
    pub score: f64,
    pub mean_return: f64,
    pub success_rate: f64,
    pub init_fingerprint: u64,
    pub critic_bound: f64,
    pub curve: Vec<CurvePoint>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub intrinsic_weight: f64,
    pub generator: String,
    pub selection_rule: String,
    pub iterations: Vec<IterationRecord>,
    pub best: Option<CandidateRef>,
    #[serde(rename = "final")]
    pub final_result: Option<FinalRecord>,
    /// `complete`, or the error that stopped the run.
    pub status: String,
}

impl RunManifest {
    fn new(cfg: &RunConfig, generator: String) -> Self {
        RunManifest {
            config: cfg.clone(),
            intrinsic_weight: cfg.effective_intrinsic_weight(),
            generator,
            selection_rule: SELECTION_RULE.to_string(),
            iterations: Vec::new(),
            best: None,
            final_result: None,
            status: "running".into(),
        }
    }

    pub fn candidate(&self, r: CandidateRef) -> Option<&CandidateRecord> {
        self.iterations
            .iter()
            .flat_map(|it| &it.candidates)
            .find(|c| c.reference() == r)
    }

    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_wall_clock(&self) -> RunManifest {
        let mut m = self.clone();
        for it in &mut m.iterations {
            for c in &mut it.candidates {
                c.wall_time_s = 0.0;
            }
        }
        if let Some(f) = &mut m.final_result {
            f.wall_time_s = 0.0;
            for p in &mut f.curve {
                p.wall_time_s = 0.0;
            }
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("prompt construction failed: {0}")]
    Prompt(#[from] crate::llm::PromptError),
    #[error("no eligible candidate in any iteration")]
    NoValidCandidates,
    #[error("final training failed: {0}")]
    FinalTraining(TrainError),
    #[error(transparent)]
    Lipschitz(#[from] LipschitzError),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    }
    fs::write(path, contents).map_err(io_err(format!("writing {}", path.display())))
}

/// Picks the best eligible candidate under [`SELECTION_RULE`].
pub fn select_best<'a, I>(records: I) -> Option<&'a CandidateRecord>
where
    I: IntoIterator<Item = &'a CandidateRecord>,
{
    records
        .into_iter()
        .filter(|c| c.is_eligible())
        .min_by(|a, b| rank(a, b))
}

/// Total order: better candidates compare as `Less`.
fn rank(a: &CandidateRecord, b: &CandidateRecord) -> Ordering {
    let score = |c: &CandidateRecord| c.score.unwrap_or(f64::NEG_INFINITY);
    score(b)
        .total_cmp(&score(a))
        .then_with(|| a.mean_lipschitz().total_cmp(&b.mean_lipschitz()))
        .then_with(|| a.iteration.cmp(&b.iteration))
        .then_with(|| a.id.cmp(&b.id))
}

/// Per-dimension feedback for one trained candidate.
pub fn candidate_feedback(
    result: &TrainResult,
    variant: FeedbackVariant,
    tau: f64,
    gamma: f64,
    opts: LipschitzOptions,
) -> Result<LipschitzArray, LipschitzError> {
    match variant {
        FeedbackVariant::SpectralNorm => {
            let a = input_lipschitz_bounds(&result.critic1);
            let b = input_lipschitz_bounds(&result.critic2);
            let dim = result.actor.input_dim();
            // critic inputs are (s^c, a); keep the state part
            let values = a.iter().zip(&b).take(dim).map(|(x, y)| x.min(*y)).collect();
            Ok(LipschitzArray {
                values,
                trajectories_seen: 0,
                approximate: false,
            })
        }
        FeedbackVariant::Reward | FeedbackVariant::DiscountedReturn => {
            let mut acc = LipschitzAccumulator::new(tau, opts)?;
            for trace in result.eval_traces.iter().filter(|t| t.len() >= 2) {
                let t = trace.to_trajectory()?;
                if variant == FeedbackVariant::DiscountedReturn {
                    acc.push(&t.with_discounted_returns(gamma)?)?;
                } else {
                    acc.push(&t)?;
                }
            }
            Ok(acc
                .finish()
                .unwrap_or_else(|| LipschitzArray::empty(result.actor.input_dim())))
        }
    }
}

fn lipschitz_options(cfg: &RunConfig, seed: u64) -> LipschitzOptions {
    LipschitzOptions {
        exact_max_len: cfg.lipschitz_exact_max_len,
        sampled_pairs: cfg.lipschitz_sampled_pairs,
        seed,
    }
}

struct Trained {
    record: CandidateRecord,
    result: Option<TrainResult>,
}

fn train_candidate(cfg: &RunConfig, c: &Candidate) -> Result<Trained, RunError> {
    let seed = derive_seed(
        cfg.seed,
        STREAM_CANDIDATE,
        (c.iteration as u64) << 32 | c.id as u64,
    );
    let train_cfg = cfg.train_config(cfg.small_steps, seed);
    let mut record = CandidateRecord {
        iteration: c.iteration,
        id: c.id,
        repr_text: c.repr.format(),
        reward_text: c.reward.format(),
        provenance: c.provenance.clone(),
        added_dims: c.repr.output_dim(),
        score: None,
        mean_return: None,
        success_rate: None,
        lipschitz: None,
        critic_bound: None,
        init_fingerprint: None,
        disqualified: None,
        wall_time_s: 0.0,
    };
    match train(cfg.env, Some(&c.repr), Some(&c.reward), &train_cfg) {
        Ok(result) => {
            let c_k = candidate_feedback(
                &result,
                cfg.feedback,
                cfg.tau,
                cfg.gamma,
                lipschitz_options(cfg, seed),
            )?;
            record.score = Some(result.score);
            record.mean_return = Some(result.mean_return);
            record.success_rate = Some(result.success_rate);
            record.lipschitz = Some(c_k);
            record.critic_bound = Some(result.critic_spectral_bound());
            record.init_fingerprint = Some(result.init_fingerprint);
            record.wall_time_s = result.wall_time_s;
            Ok(Trained {
                record,
                result: Some(result),
            })
        }
        Err(e) if e.is_disqualification() => {
            log::info!(
                "iteration {} candidate {} disqualified: {e}",
                c.iteration,
                c.id
            );
            record.disqualified = Some(e.to_string());
            Ok(Trained {
                record,
                result: None,
            })
        }
        Err(e) => {
            record.disqualified = Some(e.to_string());
            log::warn!("iteration {} candidate {} failed: {e}", c.iteration, c.id);
            Ok(Trained {
                record,
                result: None,
            })
        }
    }
}

fn persist_candidate(dir: &Path, c: &Candidate, t: &Trained) -> Result<(), RunError> {
    write(
        &dir.join("program.dsl"),
        format_program_pair(&c.repr, &c.reward),
    )?;
    write(&dir.join("response.txt"), &c.raw_response)?;
    if let Some(reason) = &t.record.disqualified {
        write(&dir.join("disqualified.txt"), format!("{reason}\n"))?;
    }
    if let Some(r) = &t.result {
        write(&dir.join("train_curve.csv"), curve_to_csv(&r.curve, true))?;
        write(&dir.join("trajectories.csv"), traces_to_csv(&r.eval_traces))?;
    }
    if let Some(c_k) = &t.record.lipschitz {
        write(&dir.join("lipschitz.csv"), c_k.to_csv())?;
    }
    Ok(())
}

/// Sampling prompt for iteration `i` given the history text so far.
pub fn sampling_prompt(
    cfg: &RunConfig,
    history: &str,
    iteration: usize,
) -> Result<PromptBundle, RunError> {
    let mut vars = PromptVars {
        task_description: Some(cfg.env.task_description().to_string()),
        total_dim: Some(cfg.env.obs_dim()),
        detail_content: Some(cfg.env.dimension_details().to_string()),
        ..PromptVars::default()
    };
    let template = if iteration == 0 {
        TemplateId::Initial
    } else {
        vars.former_history = Some(history.to_string());
        TemplateId::Subsequent
    };
    Ok(build_prompt(template, &vars)?)
}

/// One sampling-training-feedback round. Candidates train in parallel on a
/// pool of `cfg.worker_count()` threads.
pub fn run_iteration(
    iteration: usize,
    prompt: &PromptBundle,
    cfg: &RunConfig,
    generator: &mut dyn Generator,
    run_dir: &Path,
) -> Result<IterationRecord, RunError> {
    let iter_dir = run_dir.join(format!("iter_{iteration}"));
    write(&iter_dir.join("prompt.txt"), &prompt.user)?;

    let generation = match generate_candidates(
        generator,
        prompt,
        cfg.candidates,
        iteration,
        cfg.env.obs_dim(),
        cfg.generation_retries,
    ) {
        Ok(g) => g,
        Err(GenerationError::Generator(e)) => return Err(e.into()),
        Err(GenerationError::AllInvalid { rejections, .. }) => {
            persist_rejections(&iter_dir, &rejections)?;
            return Ok(IterationRecord {
                iteration,
                prompt_template: prompt.template,
                prompt: prompt.user.clone(),
                candidates: Vec::new(),
                rejections,
                feedback_prompt: String::new(),
                analysis: String::new(),
                failure: Some("every candidate slot failed validation".into()),
            });
        }
        Err(GenerationError::ZeroCandidates) => unreachable!("validated config has K >= 1"),
    };
    persist_rejections(&iter_dir, &generation.rejections)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count())
        .build()
        .expect("thread pool");
    let trained: Vec<Result<Trained, RunError>> = pool.install(|| {
        generation
            .candidates
            .par_iter()
            .map(|c| train_candidate(cfg, c))
            .collect()
    });
    let trained = trained.into_iter().collect::<Result<Vec<_>, _>>()?;
    for (c, t) in generation.candidates.iter().zip(&trained) {
        persist_candidate(&iter_dir.join(format!("candidate_{}", c.id)), c, t)?;
    }
    let records: Vec<CandidateRecord> = trained.into_iter().map(|t| t.record).collect();

    let entries: Vec<ResultEntry> = records.iter().map(result_entry).collect();
    let results = format_iteration_results(&entries, cfg.env.obs_dim());
    let feedback_prompt = build_prompt(
        TemplateId::Feedback,
        &PromptVars {
            sample_count: Some(records.len()),
            iteration_results: Some(results),
            ..PromptVars::default()
        },
    )?;
    write(&iter_dir.join("feedback_prompt.txt"), &feedback_prompt.user)?;
    let analysis = generator.analyze(&feedback_prompt, iteration)?;
    write(&iter_dir.join("analysis.txt"), &analysis)?;

    let failure = if records.iter().any(CandidateRecord::is_eligible) {
        None
    } else {
        Some("every candidate was disqualified".into())
    };
    Ok(IterationRecord {
        iteration,
        prompt_template: prompt.template,
        prompt: prompt.user.clone(),
        candidates: records,
        rejections: generation.rejections,
        feedback_prompt: feedback_prompt.user,
        analysis,
        failure,
    })
}

fn persist_rejections(dir: &Path, rejections: &[Rejection]) -> Result<(), RunError> {
    for r in rejections {
        let name = format!("rejected_{}_{}.txt", r.draw.slot, r.draw.attempt);
        write(
            &dir.join(name),
            format!("reason: {}\n\n{}", r.reason, r.raw_response),
        )?;
    }
    Ok(())
}

fn result_entry(c: &CandidateRecord) -> ResultEntry {
    ResultEntry {
        label: format!("iteration {} candidate {}", c.iteration, c.id),
        repr_text: c.repr_text.clone(),
        reward_text: c.reward_text.clone(),
        score: c.score,
        lipschitz: c.lipschitz.clone(),
        note: c.disqualified.clone(),
    }
}

/// History block appended after each iteration: candidate programs, their
/// results and the analysis.
fn history_block(record: &IterationRecord, source_dim: usize) -> String {
    let entries: Vec<ResultEntry> = record.candidates.iter().map(result_entry).collect();
    let mut out = format!("### Iteration {}\n", record.iteration);
    if entries.is_empty() {
        out.push_str("No valid candidates were produced.\n");
    } else {
        out.push_str(&format_iteration_results(&entries, source_dim));
    }
    if !record.analysis.is_empty() {
        out.push_str("Suggestions:\n");
        out.push_str(record.analysis.trim_end());
        out.push('\n');
    }
    out.push('\n');
    out
}

/// Runs the whole search and the final training. The manifest is written to
/// `cfg.out_dir/manifest.json` after every iteration and on every exit path.
pub fn run_lesr(cfg: &RunConfig, generator: &mut dyn Generator) -> Result<RunManifest, RunError> {
    let run_dir = cfg.out_dir.clone();
    fs::create_dir_all(&run_dir).map_err(io_err(format!("creating {}", run_dir.display())))?;
    let mut manifest = RunManifest::new(cfg, generator.describe());
    let outcome = search_and_train(cfg, generator, &run_dir, &mut manifest);
    manifest.status = match &outcome {
        Ok(()) => "complete".into(),
        Err(e) => format!("failed: {e}"),
    };
    let flushed = write(&run_dir.join("manifest.json"), manifest.to_json());
    outcome?;
    flushed?;
    Ok(manifest)
}

fn search_and_train(
    cfg: &RunConfig,
    generator: &mut dyn Generator,
    run_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let mut history = String::new();
    // candidates of every iteration, kept for the final training
    let mut pool: Vec<Candidate> = Vec::new();
    for i in 0..cfg.iterations {
        let prompt = sampling_prompt(cfg, &history, i)?;
        let record = run_iteration(i, &prompt, cfg, generator, run_dir)?;
        if let Some(f) = &record.failure {
            log::warn!("iteration {i}: {f}");
        }
        history.push_str(&history_block(&record, cfg.env.obs_dim()));
        pool.extend(rebuild_candidates(cfg, &record));
        manifest.iterations.push(record);
        write(&run_dir.join("manifest.json"), manifest.to_json())?;
    }

    let best = select_best(manifest.iterations.iter().flat_map(|it| &it.candidates))
        .ok_or(RunError::NoValidCandidates)?
        .reference();
    manifest.best = Some(best);
    let candidate = pool
        .iter()
        .find(|c| c.iteration == best.iteration && c.id == best.id)
        .expect("best candidate was sampled");

    // the final stage never consults the generator
    let seed = derive_seed(cfg.seed, STREAM_FINAL, 0);
    let train_cfg = cfg.train_config(cfg.final_steps, seed);
    let result = train(
        cfg.env,
        Some(&candidate.repr),
        Some(&candidate.reward),
        &train_cfg,
    )
    .map_err(RunError::FinalTraining)?;
    let final_dir = run_dir.join("final");
    write(
        &final_dir.join("program.dsl"),
        format_program_pair(&candidate.repr, &candidate.reward),
    )?;
    write(&final_dir.join("policy.bin"), result.actor.to_bytes())?;
    write(
        &final_dir.join("eval.csv"),
        curve_to_csv(&result.curve, true),
    )?;
    write(
        &final_dir.join("trajectories.csv"),
        traces_to_csv(&result.eval_traces),
    )?;
    manifest.final_result = Some(FinalRecord {
        candidate: best,
        steps: cfg.final_steps,
        seed,
        score: result.score,
        mean_return: result.mean_return,
        success_rate: result.success_rate,
        init_fingerprint: result.init_fingerprint,
        critic_bound: result.critic_spectral_bound(),
        curve: result.curve.clone(),
        wall_time_s: result.wall_time_s,
    });
    Ok(())
}

/// Re-parses the recorded programs; they validated when sampled.
fn rebuild_candidates(cfg: &RunConfig, record: &IterationRecord) -> Vec<Candidate> {
    record
        .candidates
        .iter()
        .map(|c| {
            let text = format!("repr:\n{}\nreward:\n{}\n", c.repr_text, c.reward_text);
            let (repr, reward) = crate::llm::parse_program_pair(&text, cfg.env.obs_dim())
                .expect("formatted programs re-parse");
            Candidate {
                iteration: c.iteration,
                id: c.id,
                repr,
                reward,
                provenance: c.provenance.clone(),
                raw_response: String::new(),
            }
        })
        .collect()
}

/// Default location of the manifest inside a run directory.
pub fn manifest_path(run_dir: &Path) -> PathBuf {
    run_dir.join("manifest.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iteration: usize, id: usize, score: Option<f64>, c: f64) -> CandidateRecord {
        CandidateRecord {
            iteration,
            id,
            repr_text: "out: s[0]".into(),
            reward_text: "out: s[4]".into(),
            provenance: Provenance::Mock { pool_index: 0 },
            added_dims: 1,
            score,
            mean_return: score,
            success_rate: Some(0.0),
            lipschitz: Some(LipschitzArray {
                values: vec![c; 5],
                trajectories_seen: 1,
                approximate: false,
            }),
            critic_bound: None,
            init_fingerprint: None,
            disqualified: if score.is_none() {
                Some("non-finite".into())
            } else {
                None
            },
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn argmax_score() {
        let rs = vec![
            record(0, 0, Some(3.0), 1.0),
            record(0, 1, Some(7.0), 1.0),
            record(0, 2, Some(5.0), 1.0),
        ];
        assert_eq!(select_best(&rs).unwrap().id, 1);
    }

    #[test]
    fn ties_prefer_smoother_then_earlier_then_lower_id() {
        let rs = vec![record(0, 0, Some(7.0), 2.0), record(0, 1, Some(7.0), 1.0)];
        assert_eq!(select_best(&rs).unwrap().id, 1);
        let rs = vec![record(1, 0, Some(7.0), 1.0), record(0, 2, Some(7.0), 1.0)];
        assert_eq!(
            select_best(&rs).unwrap().reference(),
            CandidateRef {
                iteration: 0,
                id: 2
            }
        );
        let rs = vec![record(0, 2, Some(7.0), 1.0), record(0, 1, Some(7.0), 1.0)];
        assert_eq!(select_best(&rs).unwrap().id, 1);
    }

    #[test]
    fn single_and_disqualified() {
        let rs = vec![record(0, 0, Some(-1.0), 1.0)];
        assert_eq!(select_best(&rs).unwrap().id, 0);
        let rs = vec![record(0, 0, None, 0.0), record(0, 1, Some(-100.0), 9.0)];
        assert_eq!(select_best(&rs).unwrap().id, 1);
        let rs = vec![record(0, 0, None, 0.0)];
        assert!(select_best(&rs).is_none());
    }

    #[test]
    fn selection_ignores_input_order() {
        let mut rs = vec![
            record(0, 0, Some(1.0), 3.0),
            record(0, 1, Some(2.0), 3.0),
            record(1, 0, Some(2.0), 1.0),
            record(1, 1, Some(2.0), 1.0),
            record(1, 2, None, 0.0),
        ];
        let expected = select_best(&rs).unwrap().reference();
        assert_eq!(
            expected,
            CandidateRef {
                iteration: 1,
                id: 0
            }
        );
        for k in 0..rs.len() {
            rs.rotate_left(1);
            rs.swap(0, k);
            assert_eq!(select_best(&rs).unwrap().reference(), expected);
        }
    }
}
