//! The `lesr` command verbs.
//!
//! Exit codes: 0 success, 1 method failure (training or search failed),
//! 2 usage or configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::config::{ConfigError, GeneratorMode, RunConfig};
use crate::lipschitz::{LipschitzAccumulator, LipschitzOptions, DEFAULT_TAU};
use crate::llm::{parse_program_pair, Generator, MockGenerator, RemoteGenerator};
use crate::nn::MlpParams;
use crate::orchestrator::{manifest_path, run_lesr};
use crate::td3::{curve_to_csv, evaluate, train};
use crate::trajectory::{traces_from_csv, traces_to_csv};

#[derive(Debug, Parser)]
#[command(
    name = "lesr",
    version,
    about = "Search state representations and intrinsic rewards for TD3"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full search and the final training.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one candidate program for `final_steps` steps (or `--steps`).
    Train {
        /// File with `repr:` and `reward:` sections.
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Evaluate a saved policy with the deterministic actor.
    Eval {
        /// Actor parameters written by `train` or `run` (`policy.bin`).
        #[arg(long)]
        policy: PathBuf,
        /// Program the policy was trained with; omit for a source-state policy.
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Per-dimension Lipschitz array of a trajectory CSV.
    Analyze {
        trajectories: PathBuf,
        /// Write the array here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, value_enum, default_value_t = Signal::Reward)]
        signal: Signal,
        /// Discount for `--signal discounted-return`.
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Signal {
    Reward,
    DiscountedReturn,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| failure(format!("creating {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| failure(format!("writing {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

pub fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out_dir {
        cfg.out_dir = o;
    }
    let mut generator: Box<dyn Generator> = match cfg.generator {
        GeneratorMode::Mock => Box::new(MockGenerator::new(cfg.seed)),
        GeneratorMode::Remote => {
            Box::new(RemoteGenerator::new(cfg.remote_config()).map_err(usage)?)
        }
    };
    let manifest = run_lesr(&cfg, generator.as_mut()).map_err(|e| {
        failure(format!(
            "{e} (manifest: {})",
            manifest_path(&cfg.out_dir).display()
        ))
    })?;
    let best = manifest.best.expect("complete run has a best candidate");
    let record = manifest
        .candidate(best)
        .expect("best candidate is recorded");
    let fin = manifest
        .final_result
        .as_ref()
        .expect("complete run has a final result");
    let mut say = |s: String| writeln!(stdout, "{s}").map_err(failure);
    say(format!(
        "best candidate: iteration {} candidate {}",
        best.iteration, best.id
    ))?;
    say(format!(
        "  search score {:.4}, mean Lipschitz {:.4}",
        record.score.unwrap_or(f64::NAN),
        record.mean_lipschitz()
    ))?;
    say(format!(
        "  repr:\n    {}",
        record.repr_text.replace('\n', "\n    ")
    ))?;
    say(format!(
        "  reward:\n    {}",
        record.reward_text.replace('\n', "\n    ")
    ))?;
    say(format!(
        "final training ({} steps): score {:.4}, success rate {:.2}",
        fin.steps, fin.score, fin.success_rate
    ))?;
    say(format!(
        "manifest: {}",
        manifest_path(&cfg.out_dir).display()
    ))?;
    Ok(())
}

pub fn cmd_train(
    program: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    steps: Option<usize>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let text = read_file(program)?;
    let (repr, reward) = parse_program_pair(&text, cfg.env.obs_dim())
        .map_err(|e| usage(format!("{}: {e}", program.display())))?;
    let steps = steps.unwrap_or(cfg.final_steps);
    let train_cfg = cfg.train_config(steps, seed.unwrap_or(cfg.seed));
    train_cfg.validate().map_err(usage)?;
    let result = train(cfg.env, Some(&repr), Some(&reward), &train_cfg).map_err(failure)?;
    let out = out_dir.unwrap_or_else(|| cfg.out_dir.join("train"));
    write_file(
        &out.join("train_curve.csv"),
        curve_to_csv(&result.curve, true),
    )?;
    write_file(
        &out.join("trajectories.csv"),
        traces_to_csv(&result.eval_traces),
    )?;
    write_file(&out.join("policy.bin"), result.actor.to_bytes())?;
    write_file(
        &out.join("program.dsl"),
        crate::llm::format_program_pair(&repr, &reward),
    )?;
    writeln!(
        stdout,
        "trained {steps} steps: score {:.4}, mean return {:.4}, success rate {:.2}, critic bound {:.4}\noutput: {}",
        result.score,
        result.mean_return,
        result.success_rate,
        result.critic_spectral_bound(),
        out.display()
    )
    .map_err(failure)
}

pub fn cmd_eval(
    policy: &Path,
    program: Option<&Path>,
    config: Option<&Path>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    episodes: Option<usize>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let bytes = std::fs::read(policy)
        .map_err(|e| usage(format!("cannot read {}: {e}", policy.display())))?;
    let actor =
        MlpParams::from_bytes(&bytes).map_err(|e| usage(format!("{}: {e}", policy.display())))?;
    let programs = match program {
        Some(p) => Some(
            parse_program_pair(&read_file(p)?, cfg.env.obs_dim())
                .map_err(|e| usage(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let repr = programs.as_ref().map(|(f, _)| f);
    let expected = cfg.env.obs_dim() + repr.map_or(0, |f| f.output_dim());
    if actor.input_dim() != expected || actor.output_dim() != cfg.env.action_dim() {
        return Err(usage(format!(
            "policy maps {} -> {} values, but the state has {} and the action {}",
            actor.input_dim(),
            actor.output_dim(),
            expected,
            cfg.env.action_dim()
        )));
    }
    let episodes = episodes.unwrap_or(cfg.eval_episodes);
    if episodes == 0 {
        return Err(usage("--episodes must be positive"));
    }
    let eval =
        evaluate(&actor, cfg.env, repr, episodes, seed.unwrap_or(cfg.seed)).map_err(failure)?;
    if let Some(out) = out_dir {
        write_file(&out.join("trajectories.csv"), traces_to_csv(&eval.traces))?;
    }
    writeln!(
        stdout,
        "{episodes} episodes: score {:.4}, mean return {:.4}, success rate {:.2}",
        eval.score, eval.mean_return, eval.success_rate
    )
    .map_err(failure)
}

pub fn cmd_analyze(
    trajectories: &Path,
    out: Option<&Path>,
    tau: f64,
    signal: Signal,
    gamma: f64,
    seed: Option<u64>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let file = std::fs::File::open(trajectories)
        .map_err(|e| usage(format!("cannot read {}: {e}", trajectories.display())))?;
    let traces =
        traces_from_csv(file).map_err(|e| usage(format!("{}: {e}", trajectories.display())))?;
    let opts = LipschitzOptions {
        seed: seed.unwrap_or(0),
        ..LipschitzOptions::default()
    };
    let mut acc = LipschitzAccumulator::new(tau, opts).map_err(usage)?;
    for trace in traces.iter().filter(|t| t.len() >= 2) {
        let t = trace.to_trajectory().map_err(usage)?;
        let t = match signal {
            Signal::Reward => t,
            Signal::DiscountedReturn => t.with_discounted_returns(gamma).map_err(usage)?,
        };
        acc.push(&t).map_err(usage)?;
    }
    let array = acc
        .finish()
        .ok_or_else(|| usage("no episode with at least two steps"))?;
    match out {
        Some(path) => write_file(path, array.to_csv()),
        None => write!(stdout, "{}", array.to_csv()).map_err(failure),
    }
}

/// Parses `args` and runs the verb; errors go to standard error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out, &mut stdout),
        Command::Train {
            program,
            config,
            seed,
            out,
            steps,
        } => cmd_train(&program, config.as_deref(), seed, out, steps, &mut stdout),
        Command::Eval {
            policy,
            program,
            config,
            seed,
            out,
            episodes,
        } => cmd_eval(
            &policy,
            program.as_deref(),
            config.as_deref(),
            seed,
            out,
            episodes,
            &mut stdout,
        ),
        Command::Analyze {
            trajectories,
            out,
            tau,
            signal,
            gamma,
            seed,
        } => cmd_analyze(
            &trajectories,
            out.as_deref(),
            tau,
            signal,
            gamma,
            seed,
            &mut stdout,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
