//! Agent parameters, run configuration, and the tabular learner step.
//!
//! The learner keeps an advantage table `A` and a value table `V`. For a
//! trajectory played at temperature `tau` the target policy is
//! `pi_tau = softmax(A / tau)` and the action values are
//! `Q(s, .) = A(s, .) - E_{pi_tau}[A(s, .)] + V(s)`. One step ascends
//!
//! * `xi (vs_t - V(s_t))` along `dV(s_t)`;
//! * `alpha (qs_t - Q(s_t, a_t))` along `dQ(s_t, a_t)`, routed through the
//!   centering with the policy and the value held constant unless the
//!   `no_stop_pi` / `no_stop_v` ablations release them;
//! * `beta rho_t (r_t + gamma vs_{t+1} - V(s_t))` along
//!   `tau d log pi_tau(a_t | s_t) / dA(s_t, .)`,
//!
//! averaged over every step in the batch and scaled by the learning rate.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::invalid;
use crate::policy::{boltzmann_policy, centered_q_jacobian, Temperature};
use crate::table::{PolicyTable, StateActionTable};
use crate::traces::{
    clipped_ratios, drtrace_q_targets, drtrace_v_targets, q_residual_targets, retrace_targets, vtrace_targets,
    TraceConfig, Trajectory,
};
use crate::{Error, Result};

/// The learner's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub a: StateActionTable,
    pub v: Vec<f64>,
    /// Bumped on every learner step.
    pub version: u64,
}

impl AgentParams {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { a: StateActionTable::zeros(n_states, n_actions), v: vec![0.0; n_states], version: 0 }
    }

    pub fn n_states(&self) -> usize {
        self.a.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.a.n_actions()
    }

    /// `softmax(A(s, .) / tau)` for every state.
    pub fn policy(&self, tau: Temperature) -> PolicyTable {
        let mut probs = Vec::with_capacity(self.a.as_slice().len());
        for s in 0..self.n_states() {
            probs.extend_from_slice(boltzmann_policy(self.a.row(s), tau).expect("finite parameters").probs());
        }
        PolicyTable::from_vec(self.n_states(), self.n_actions(), probs).expect("softmax rows")
    }

    /// `A(s, a) - E_pi[A(s, .)] + V(s)`.
    pub fn q_table(&self, pi: &PolicyTable) -> StateActionTable {
        let mean = self.a.expectation_under(pi);
        StateActionTable::from_fn(self.n_states(), self.n_actions(), |s, a| self.a.get(s, a) - mean[s] + self.v[s])
    }

    pub fn is_finite(&self) -> bool {
        self.a.as_slice().iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Order-dependent digest of every parameter bit and the version, used
    /// to detect torn copies.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.version;
        for x in self.a.as_slice().iter().chain(&self.v) {
            h ^= x.to_bits();
            h = h.wrapping_mul(0x0000_0100_0000_01b3).rotate_left(5);
        }
        h
    }
}

/// Which return estimators produce the value and action-value targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// DR-trace for both targets.
    #[default]
    DrTrace,
    /// V-Trace for values and ReTrace for action values.
    VtraceRetrace,
}

/// Independent switches that remove one ingredient each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ablations {
    /// Let the Q loss reach the policy inside the advantage centering.
    pub no_stop_pi: bool,
    /// Let the Q loss reach the value table.
    pub no_stop_v: bool,
    /// V-Trace values, and DR-trace weights on the action-value residual.
    pub no_drtrace: bool,
    /// Draw the Q and policy loss scales from `U[0, 20]` per trajectory.
    pub random_scaling: bool,
    /// Draw temperatures from the untrained bandit ensemble.
    pub no_bva: bool,
    /// Act with `tau = 1` throughout.
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c_bar: f64,
    pub rho_bar: f64,
    /// Learner steps between parameter publications.
    pub d_push: u64,
    /// Environment steps between actor parameter pulls.
    pub d_pull: u64,
    pub num_actors: usize,
    /// Trajectories per learner step.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Environment steps to collect.
    pub total_steps: u64,
    pub seed: u64,
    pub ablations: Ablations,
    pub estimator: Estimator,
    /// Batches each trajectory is used in.
    pub sample_reuse: usize,
    /// Bootstrap truncated episodes from the value of their last state.
    pub bootstrap: bool,
    pub max_episode_steps: usize,
    /// Environment steps between evaluations.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub bandit_members: usize,
    pub bandit_candidates: usize,
    pub ucb_scale: f64,
    /// Capacity of the trajectory queue between actors and learner.
    pub queue_capacity: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: 0.997,
            xi: 1.0,
            alpha: 10.0,
            beta: 10.0,
            c_bar: 1.05,
            rho_bar: 1.05,
            d_push: 25,
            d_pull: 64,
            num_actors: 4,
            batch_size: 64,
            learning_rate: 0.05,
            total_steps: 100_000,
            seed: 0,
            ablations: Ablations::default(),
            estimator: Estimator::DrTrace,
            sample_reuse: 2,
            bootstrap: true,
            max_episode_steps: 1000,
            eval_interval: 5000,
            eval_episodes: 10,
            bandit_members: 7,
            bandit_candidates: 7,
            ucb_scale: 1.0,
            queue_capacity: 1024,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let conf = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        self.trace_config().map_err(|e| Error::InvalidConfig(alloc::format!("{e}")))?;
        for (name, x) in [("xi", self.xi), ("alpha", self.alpha), ("beta", self.beta), ("learning_rate", self.learning_rate)] {
            if !x.is_finite() || x < 0.0 {
                return conf(alloc::format!("{name} must be finite and non-negative, got {x}"));
            }
        }
        if !self.ucb_scale.is_finite() || self.ucb_scale < 0.0 {
            return conf("ucb_scale must be finite and non-negative".into());
        }
        let positive = [
            ("d_push", self.d_push as usize),
            ("d_pull", self.d_pull as usize),
            ("num_actors", self.num_actors),
            ("batch_size", self.batch_size),
            ("sample_reuse", self.sample_reuse),
            ("max_episode_steps", self.max_episode_steps),
            ("eval_interval", self.eval_interval as usize),
            ("eval_episodes", self.eval_episodes),
            ("bandit_members", self.bandit_members),
            ("bandit_candidates", self.bandit_candidates),
            ("queue_capacity", self.queue_capacity),
        ];
        for (name, x) in positive {
            if x == 0 {
                return conf(alloc::format!("{name} must be positive"));
            }
        }
        if self.ablations.baseline && self.ablations.no_bva {
            return conf("baseline and no_bva choose temperatures in incompatible ways".into());
        }
        if self.ablations.no_drtrace && self.estimator == Estimator::VtraceRetrace {
            return conf("no_drtrace already replaces the DR-trace estimators".into());
        }
        Ok(())
    }

    pub fn trace_config(&self) -> Result<TraceConfig> {
        let mut cfg = TraceConfig::new(self.c_bar, self.rho_bar, self.gamma)?;
        cfg.bootstrap = self.bootstrap;
        Ok(cfg)
    }
}

/// Batch-averaged ascent direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub a: StateActionTable,
    pub v: Vec<f64>,
    /// Number of steps the direction was averaged over.
    pub samples: usize,
}

/// Ascent direction for one batch.
///
/// `target` replaces the per-trajectory `softmax(A / tau)` target policy by
/// a fixed table (policy evaluation).
pub fn batch_gradient<R: Rng + ?Sized>(
    params: &AgentParams,
    batch: &[Trajectory],
    cfg: &RunConfig,
    rng: &mut R,
    target: Option<&PolicyTable>,
) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::InvalidBatch("empty batch".into()));
    }
    let trace_cfg = cfg.trace_config()?;
    let (ns, na) = (params.n_states(), params.n_actions());
    if let Some(t) = target {
        if t.n_states() != ns || t.n_actions() != na {
            return Err(invalid!("target policy shape does not match the parameters"));
        }
    }
    let mut grad_a = StateActionTable::zeros(ns, na);
    let mut grad_v = vec![0.0; ns];
    let mut samples = 0usize;

    for traj in batch {
        let tau = traj
            .temperature
            .ok_or_else(|| Error::InvalidBatch("trajectory has no temperature".into()))?;
        traj.validate().map_err(|e| Error::InvalidBatch(alloc::format!("{e}")))?;
        if traj.steps.iter().any(|s| s.state >= ns || s.action >= na) || traj.bootstrap_state >= ns {
            return Err(Error::InvalidBatch("trajectory indices exceed the parameter tables".into()));
        }
        let pi = match target {
            Some(t) => t.clone(),
            None => params.policy(tau),
        };
        let q = params.q_table(&pi);
        let v = &params.v;
        let (vs, qs) = if cfg.estimator == Estimator::VtraceRetrace {
            (vtrace_targets(traj, v, &pi, &trace_cfg)?, retrace_targets(traj, &q, &pi, &trace_cfg)?)
        } else if cfg.ablations.no_drtrace {
            (vtrace_targets(traj, v, &pi, &trace_cfg)?, q_residual_targets(traj, &q, &pi, &trace_cfg)?)
        } else {
            (drtrace_v_targets(traj, v, &q, &pi, &trace_cfg)?, drtrace_q_targets(traj, v, &q, &pi, &trace_cfg)?)
        };
        let rho = clipped_ratios(traj, &pi, &trace_cfg)?.rho;
        let (alpha, beta) = if cfg.ablations.random_scaling {
            (20.0 * rng.random::<f64>(), 20.0 * rng.random::<f64>())
        } else {
            (cfg.alpha, cfg.beta)
        };
        let tail = if traj.is_terminated() || !trace_cfg.bootstrap { 0.0 } else { v[traj.bootstrap_state] };
        let n = traj.len();
        for (t, step) in traj.steps.iter().enumerate() {
            let (s, a) = (step.state, step.action);
            let probs = pi.row(s);

            grad_v[s] += cfg.xi * (vs[t] - v[s]);

            let q_err = alpha * (qs[t] - q.get(s, a));
            let jac = if target.is_none() && cfg.ablations.no_stop_pi {
                centered_q_jacobian(params.a.row(s), tau, false)?[a * na..(a + 1) * na].to_vec()
            } else {
                (0..na).map(|b| if a == b { 1.0 } else { 0.0 } - probs[b]).collect()
            };
            for (b, j) in jac.iter().enumerate() {
                grad_a.add(s, b, q_err * j);
            }
            if cfg.ablations.no_stop_v {
                grad_v[s] += q_err;
            }

            let vs_next = if t + 1 < n { vs[t + 1] } else { tail };
            let adv = beta * rho[t] * (step.reward + cfg.gamma * vs_next - v[s]);
            for (b, p) in probs.iter().enumerate() {
                grad_a.add(s, b, adv * (if a == b { 1.0 } else { 0.0 } - p));
            }
            samples += 1;
        }
    }
    let scale = 1.0 / samples as f64;
    let a = StateActionTable::from_vec(ns, na, grad_a.into_vec().into_iter().map(|g| g * scale).collect())?;
    let v = grad_v.into_iter().map(|g| g * scale).collect();
    Ok(Gradient { a, v, samples })
}

/// One learner step: parameters moved by `learning_rate` along the batch
/// direction, version bumped.
pub fn learner_step<R: Rng + ?Sized>(
    params: &AgentParams,
    batch: &[Trajectory],
    cfg: &RunConfig,
    rng: &mut R,
) -> Result<AgentParams> {
    learner_step_with_target(params, batch, cfg, rng, None)
}

/// [`learner_step`] with an optional fixed target policy.
pub fn learner_step_with_target<R: Rng + ?Sized>(
    params: &AgentParams,
    batch: &[Trajectory],
    cfg: &RunConfig,
    rng: &mut R,
    target: Option<&PolicyTable>,
) -> Result<AgentParams> {
    let grad = batch_gradient(params, batch, cfg, rng, target)?;
    let lr = cfg.learning_rate;
    let mut next = params.clone();
    for (x, g) in next.a.as_mut_slice().iter_mut().zip(grad.a.as_slice()) {
        *x += lr * g;
    }
    for (x, g) in next.v.iter_mut().zip(&grad.v) {
        *x += lr * g;
    }
    next.version += 1;
    if !next.is_finite() {
        return Err(Error::Degenerate("learner step produced non-finite parameters".into()));
    }
    Ok(next)
}
