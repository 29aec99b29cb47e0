//! Command-line front end.
//!
//! ```text
//! dice run <config> [--env NAME|FILE] [--seeds 1,2,3] [--steps N]
//!                   [--ablation NAME]... [--sync] [--out DIR] [--plot]
//! ```
//!
//! Flags override the config file. With `--out`, each seed writes
//! `metrics-seed<S>.csv` and `checkpoint-seed<S>.txt`, and the run writes
//! `summary.csv` (plus `returns.svg` with `--plot`); without it the summary
//! goes to standard output. `DICE_RL_THREADS` caps the number of actor
//! threads of non-`--sync` runs.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dice_core::learner::RunConfig;
use dice_core::mdp::{greedy_policy, optimal_values, TabularMdp};
use dice_core::policy::PolicyDistribution;
use dice_core::stats;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::write_checkpoint;
use crate::config::{parse_seeds, read_experiment, Ablation, ExperimentSpec};
use crate::metrics::{returns_svg, run_csv, summarize, summary_csv, ScoreReference, Summary};
use crate::runtime::{run_with_state, Schedule, TrainingReport, TrainingState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const THREADS_VAR: &str = "DICE_RL_THREADS";

/// Episodes used to estimate the random and reference returns.
const REFERENCE_EPISODES: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "dice", version, about = "Tabular actor-learner training with adaptive exploration temperatures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on one environment for every seed and export metrics.
    Run(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Experiment file of `key = value` lines.
    config: PathBuf,
    /// Builtin environment name or MDP file.
    #[arg(long)]
    env: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, value_parser = seed_list)]
    seeds: Option<SeedList>,
    /// Environment-step budget per seed.
    #[arg(long)]
    steps: Option<u64>,
    /// Ablation to switch on; repeatable.
    #[arg(long, value_enum)]
    ablation: Vec<Ablation>,
    /// Single-threaded deterministic schedule.
    #[arg(long)]
    sync: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot of the returns.
    #[arg(long)]
    plot: bool,
}

#[derive(Debug, Clone)]
struct SeedList(Vec<u64>);

fn seed_list(text: &str) -> Result<SeedList, String> {
    parse_seeds(text).map(SeedList)
}

#[derive(Debug)]
pub enum CliError {
    /// Help or version text requested; not a failure.
    Info(String),
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Info(_) => EXIT_OK,
            Self::Usage(_) => EXIT_USAGE,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Info(m) | Self::Usage(m) | Self::Runtime(m) => m,
        }
    }
}

/// Parses the arguments (without the program name) and the config file they
/// name into a validated experiment.
pub fn parse_args<I, T>(argv: I) -> Result<ExperimentSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("dice")).chain(argv.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        let text = e.render().to_string();
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(text),
            _ => CliError::Usage(text),
        }
    })?;
    let Command::Run(args) = cli.command;
    let mut spec = read_experiment(&args.config).map_err(|e| CliError::Usage(format!("error: {e}")))?;
    if let Some(env) = args.env {
        spec.env = env;
    }
    if let Some(seeds) = args.seeds {
        spec.seeds = seeds.0;
    }
    if let Some(steps) = args.steps {
        spec.run.total_steps = steps;
    }
    for a in args.ablation {
        a.apply(&mut spec.run.ablations);
    }
    spec.sync |= args.sync;
    spec.plot |= args.plot;
    if args.out.is_some() {
        spec.out = args.out;
    }
    spec.validate().map_err(|e| CliError::Usage(format!("error: {e}")))?;
    Ok(spec)
}

/// Value of `DICE_RL_THREADS` if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_VAR).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

fn mean_return<F>(env: &TabularMdp, behavior: F, max_steps: usize) -> dice_core::Result<f64>
where
    F: FnMut(usize) -> PolicyDistribution + Clone,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut total = Vec::with_capacity(REFERENCE_EPISODES);
    for _ in 0..REFERENCE_EPISODES {
        let t = dice_core::mdp::sample_episode(env, behavior.clone(), None, &mut rng, max_steps)?;
        total.push(t.raw_return);
    }
    Ok(stats::mean(&total).unwrap_or(0.0))
}

/// Raw returns of the uniform policy and of the optimal policy for the
/// training discount; `None` when they coincide.
pub fn score_reference(env: &TabularMdp, cfg: &RunConfig) -> dice_core::Result<Option<ScoreReference>> {
    let na = env.n_actions();
    let uniform = PolicyDistribution::uniform(na)?;
    let random = mean_return(env, |_| uniform.clone(), cfg.max_episode_steps)?;
    let (_, q) = optimal_values(&env.with_gamma(cfg.gamma)?, 1e-10, 1_000_000)?;
    let best = greedy_policy(&q);
    let reference = mean_return(env, |s| best.distribution(s), cfg.max_episode_steps)?;
    Ok((reference != random).then_some(ScoreReference { random, reference }))
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub seeds: Vec<u64>,
    pub reports: Vec<TrainingReport>,
    pub states: Vec<TrainingState>,
    pub summary: Summary,
}

/// Runs every seed and writes per-seed metrics and checkpoints plus the summary.
pub fn run_experiment(spec: &ExperimentSpec, log: &mut dyn Write) -> Result<ExperimentOutcome, CliError> {
    let runtime = |e: &dyn std::fmt::Display| CliError::Runtime(format!("error: {e}"));
    let env = spec.environment().map_err(|e| CliError::Usage(format!("error: {e}")))?;
    let schedule = if spec.sync { Schedule::Synchronous } else { Schedule::Threaded };
    let mut reports = Vec::with_capacity(spec.seeds.len());
    let mut states = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        let mut cfg = spec.run_for(seed);
        if let (Schedule::Threaded, Some(cap)) = (schedule, thread_cap()) {
            cfg.num_actors = cfg.num_actors.min(cap);
        }
        let (report, state) = run_with_state(&env, &cfg, schedule).map_err(|e| runtime(&e))?;
        let _ = writeln!(
            log,
            "seed {seed}: {} env steps, {} learner steps, final greedy return {}",
            report.env_steps,
            report.learner_steps,
            report.final_point().mean_return
        );
        reports.push(report);
        states.push(state);
    }
    let refs = score_reference(&env, &spec.run).map_err(|e| runtime(&e))?;
    let summary = summarize(&reports, refs);
    if let Some(dir) = &spec.out {
        let io = |e: std::io::Error| CliError::Runtime(format!("error: {}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        for ((seed, report), state) in spec.seeds.iter().zip(&reports).zip(&states) {
            std::fs::write(dir.join(format!("metrics-seed{seed}.csv")), run_csv(report)).map_err(io)?;
            write_checkpoint(&dir.join(format!("checkpoint-seed{seed}.txt")), state).map_err(|e| runtime(&e))?;
        }
        std::fs::write(dir.join("summary.csv"), summary_csv(&summary)).map_err(io)?;
        if spec.plot {
            std::fs::write(dir.join("returns.svg"), returns_svg(&reports, &spec.env)).map_err(io)?;
        }
    }
    Ok(ExperimentOutcome { seeds: spec.seeds.clone(), reports, states, summary })
}

/// Full command: parse, run, print. Returns the process exit code.
pub fn main_with_args<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(argv).and_then(|spec| {
        let outcome = run_experiment(&spec, stderr)?;
        if spec.out.is_none() {
            let _ = stdout.write_all(summary_csv(&outcome.summary).as_bytes());
        }
        Ok(())
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Info(text)) => {
            let _ = stdout.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.message().trim_end());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_file(body: &str) -> (tempfile::TempDir, String) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, body).unwrap();
        let p = path.display().to_string();
        (dir, p)
    }

    #[test]
    fn seeds_flag_sets_three_seeds() {
        let (_d, cfg) = config_file("env = chain-3\n");
        let spec = parse_args(["run", cfg.as_str(), "--seeds", "1,2,3"]).unwrap();
        assert_eq!(spec.seeds, vec![1, 2, 3]);
    }

    #[test]
    fn flags_override_the_file() {
        let (_d, cfg) = config_file("env = chain-3\ntotal_steps = 10\nsync = false\n");
        let spec = parse_args([
            "run", &cfg, "--env", "chain-4", "--steps", "99", "--ablation", "no_stop_v", "--ablation", "random_scaling",
            "--sync", "--out", "x", "--plot",
        ])
        .unwrap();
        assert_eq!(spec.env, "chain-4");
        assert_eq!(spec.run.total_steps, 99);
        assert!(spec.run.ablations.no_stop_v && spec.run.ablations.random_scaling);
        assert!(spec.sync && spec.plot);
        assert_eq!(spec.out, Some(PathBuf::from("x")));
    }

    #[test]
    fn usage_errors() {
        let (_d, cfg) = config_file("env = chain-3\n");
        let empty: [&str; 0] = [];
        for argv in [
            &empty[..],
            &["run"][..],
            &["run", cfg.as_str(), "--ablation", "bogus"][..],
            &["run", cfg.as_str(), "--frobnicate"][..],
            &["run", cfg.as_str(), "--seeds", "1,x"][..],
            &["run", "/no/such/config"][..],
            &["walk", cfg.as_str()][..],
        ] {
            let err = parse_args(argv.iter().copied()).unwrap_err();
            assert_eq!(err.exit_code(), EXIT_USAGE, "{argv:?}");
        }
        let err = parse_args(["run", cfg.as_str(), "--ablation", "baseline", "--ablation", "no_bva"]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn empty_argv_prints_usage_and_exits_2() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let empty: [&str; 0] = [];
        assert_eq!(main_with_args(empty, &mut out, &mut err), EXIT_USAGE);
        assert!(String::from_utf8(err).unwrap().contains("Usage"));
    }

    #[test]
    fn help_exits_0() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(main_with_args(["--help"], &mut out, &mut err), EXIT_OK);
        assert!(String::from_utf8(out).unwrap().contains("run"));
    }

    #[test]
    fn reference_returns_on_a_chain() {
        let env = dice_core::mdp::builtin_environment("deceptive-chain-6").unwrap();
        let refs = score_reference(&env, &RunConfig::default()).unwrap().unwrap();
        assert_eq!(refs.reference, 10.0);
        assert!(refs.random < refs.reference);
    }
}
