//! Experiment description: a flat `key = value` file.
//!
//! ```text
//! # comments and blank lines are ignored
//! env = deceptive-chain-10      # builtin name or path to an MDP file
//! seeds = 1,2,3
//! total_steps = 20000
//! ablations = no_stop_pi,no_stop_v
//! estimator = vtrace_retrace    # or drtrace
//! sync = true
//! out = results
//! plot = true
//! ```
//!
//! Every other key is a [`RunConfig`] field of the same name: `gamma`, `xi`,
//! `alpha`, `beta`, `c_bar`, `rho_bar`, `d_push`, `d_pull`, `num_actors`,
//! `batch_size`, `learning_rate`, `total_steps`, `sample_reuse`,
//! `bootstrap`, `max_episode_steps`, `eval_interval`, `eval_episodes`,
//! `bandit_members`, `bandit_candidates`, `ucb_scale`, `queue_capacity`.
//! Unset keys keep their defaults; `env` is required.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use dice_core::learner::{Ablations, Estimator, RunConfig};
use dice_core::mdp::{builtin_environment, TabularMdp};

use crate::error::{Error, Result, Source};
use crate::mdp_file::read_mdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Ablation {
    NoStopPi,
    NoStopV,
    NoDrtrace,
    RandomScaling,
    NoBva,
    Baseline,
}

impl Ablation {
    pub fn apply(self, a: &mut Ablations) {
        match self {
            Self::NoStopPi => a.no_stop_pi = true,
            Self::NoStopV => a.no_stop_v = true,
            Self::NoDrtrace => a.no_drtrace = true,
            Self::RandomScaling => a.random_scaling = true,
            Self::NoBva => a.no_bva = true,
            Self::Baseline => a.baseline = true,
        }
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Builtin environment name or MDP file path.
    pub env: String,
    /// Run settings; `seed` is replaced by each entry of `seeds`.
    pub run: RunConfig,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub sync: bool,
    pub plot: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Error::Core(dice_core::Error::InvalidConfig(msg.into()));
        if self.seeds.is_empty() {
            return Err(bad("at least one seed is required"));
        }
        if self.run.eval_interval == 0 {
            return Err(bad("eval_interval must be at least 1"));
        }
        if self.env.is_empty() {
            return Err(bad("no environment given"));
        }
        self.run.validate()?;
        Ok(())
    }

    /// The run settings for one seed.
    pub fn run_for(&self, seed: u64) -> RunConfig {
        RunConfig { seed, ..self.run.clone() }
    }

    /// Resolves `env` to a builtin first, then to a file.
    pub fn environment(&self) -> Result<TabularMdp> {
        match builtin_environment(&self.env) {
            Ok(m) => Ok(m),
            Err(_) if Path::new(&self.env).is_file() => read_mdp(Path::new(&self.env)),
            Err(e) => Err(e.into()),
        }
    }
}

pub fn parse_seeds(text: &str) -> std::result::Result<Vec<u64>, String> {
    text.split(',')
        .map(|w| w.trim().parse::<u64>().map_err(|_| format!("invalid seed `{}`", w.trim())))
        .collect()
}

fn parse_bool(text: &str) -> Option<bool> {
    match text {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

pub fn parse_experiment(text: &str, name: &str) -> Result<ExperimentSpec> {
    let src = Source { name };
    let mut spec = ExperimentSpec {
        env: String::new(),
        run: RunConfig::default(),
        seeds: vec![0],
        out: None,
        sync: false,
        plot: false,
    };
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| src.err(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(src.err(line, format!("`{key}` is set twice")));
        }
        let flag = || parse_bool(value).ok_or_else(|| src.err(line, format!("`{key}` expects true or false")));
        let r = &mut spec.run;
        match key {
            "env" => spec.env = value.to_string(),
            "seeds" => spec.seeds = parse_seeds(value).map_err(|m| src.err(line, m))?,
            "out" => spec.out = Some(PathBuf::from(value)),
            "sync" => spec.sync = flag()?,
            "plot" => spec.plot = flag()?,
            "ablations" => {
                for w in value.split(',').map(str::trim).filter(|w| !w.is_empty()) {
                    let a: Ablation = w.parse().map_err(|_| src.err(line, format!("unknown ablation `{w}`")))?;
                    a.apply(&mut r.ablations);
                }
            }
            "estimator" => {
                r.estimator = match value {
                    "drtrace" => Estimator::DrTrace,
                    "vtrace_retrace" => Estimator::VtraceRetrace,
                    _ => return Err(src.err(line, format!("unknown estimator `{value}`"))),
                }
            }
            "bootstrap" => r.bootstrap = flag()?,
            "gamma" => r.gamma = src.num(line, key, value)?,
            "xi" => r.xi = src.num(line, key, value)?,
            "alpha" => r.alpha = src.num(line, key, value)?,
            "beta" => r.beta = src.num(line, key, value)?,
            "c_bar" => r.c_bar = src.num(line, key, value)?,
            "rho_bar" => r.rho_bar = src.num(line, key, value)?,
            "learning_rate" => r.learning_rate = src.num(line, key, value)?,
            "ucb_scale" => r.ucb_scale = src.num(line, key, value)?,
            "d_push" => r.d_push = src.num(line, key, value)?,
            "d_pull" => r.d_pull = src.num(line, key, value)?,
            "total_steps" => r.total_steps = src.num(line, key, value)?,
            "eval_interval" => r.eval_interval = src.num(line, key, value)?,
            "num_actors" => r.num_actors = src.num(line, key, value)?,
            "batch_size" => r.batch_size = src.num(line, key, value)?,
            "sample_reuse" => r.sample_reuse = src.num(line, key, value)?,
            "max_episode_steps" => r.max_episode_steps = src.num(line, key, value)?,
            "eval_episodes" => r.eval_episodes = src.num(line, key, value)?,
            "bandit_members" => r.bandit_members = src.num(line, key, value)?,
            "bandit_candidates" => r.bandit_candidates = src.num(line, key, value)?,
            "queue_capacity" => r.queue_capacity = src.num(line, key, value)?,
            _ => return Err(src.err(line, format!("unknown key `{key}`"))),
        }
    }
    if spec.env.is_empty() {
        return Err(src.err(0, "missing `env`"));
    }
    Ok(spec)
}

pub fn read_experiment(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_experiment(&text, &path.display().to_string())
}
