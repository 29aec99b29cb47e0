//! Off-policy return targets from sampled trajectories.
//!
//! Notation used in the doc comments below, for a trajectory with steps
//! `t = 0..T`:
//!
//! * `rho_t = min(pi(a_t|s_t) / mu_t, rho_bar)` and
//!   `c_t = min(pi(a_t|s_t) / mu_t, c_bar)`;
//! * `c[i:j] = c_i * ... * c_j`, the empty product (`j < i`) being 1;
//! * the value after the last step is 0 if the episode ended (`done`) and
//!   the bootstrap value of `bootstrap_state` otherwise.
//!
//! Each estimator is evaluated by a single backward pass. The Q-form
//! DR-trace target shares the V-form correction:
//! `qs_t = Q_t + delta_t + gamma (vs_{t+1} - V_{t+1})`, which is the series
//! `Q_t + sum_k gamma^k c[t+1:t+k-1] rho~_{t,k} delta_{t+k}` with
//! `rho~_{t,0} = 1` and `rho~_{t,k} = rho_{t+k}`.

pub mod exact;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::policy::Temperature;
use crate::table::{PolicyTable, StateActionTable};
use crate::{Error, Result};

/// Clipping constants, discount, and the truncation horizon of the exact
/// operator forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub c_bar: f64,
    pub rho_bar: f64,
    pub gamma: f64,
    /// Last power of `gamma` kept when the exact operators expand their
    /// series.
    pub k_max: usize,
    /// Bootstrap truncated (not `done`) trajectories from the value of their
    /// `bootstrap_state`; otherwise their tail value is 0.
    pub bootstrap: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { c_bar: 1.05, rho_bar: 1.05, gamma: 0.997, k_max: 20_000, bootstrap: true }
    }
}

impl TraceConfig {
    pub fn new(c_bar: f64, rho_bar: f64, gamma: f64) -> Result<Self> {
        let cfg = Self { c_bar, rho_bar, gamma, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Unclipped ratios (`c_bar = rho_bar = inf`).
    pub fn unclipped(gamma: f64) -> Result<Self> {
        Self::new(f64::INFINITY, f64::INFINITY, gamma)
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid!("discount must lie in (0, 1), got {}", self.gamma));
        }
        if self.c_bar.is_nan() || self.c_bar < 1.0 {
            return Err(invalid!("c_bar must be at least 1, got {}", self.c_bar));
        }
        if self.rho_bar.is_nan() || self.rho_bar < self.c_bar {
            return Err(invalid!(
                "rho_bar ({}) must be at least c_bar ({})",
                self.rho_bar,
                self.c_bar
            ));
        }
        Ok(())
    }

    pub fn rho(&self, ratio: f64) -> f64 {
        ratio.min(self.rho_bar)
    }

    pub fn c(&self, ratio: f64) -> f64 {
        ratio.min(self.c_bar)
    }
}

/// `k = ceil(ln(tol (1 - gamma) / B) / ln gamma)`, the smallest horizon with
/// `gamma^k B / (1 - gamma) <= tol` for a residual bound `B`; the truncation
/// bound `gamma^(k+1) B / (1 - gamma)` is then below `tol` as well.
pub fn k_max_for_tolerance(gamma: f64, tol: f64, residual_bound: f64) -> usize {
    if residual_bound <= 0.0 {
        return 1;
    }
    let k = libm::ceil(libm::log(tol * (1.0 - gamma) / residual_bound) / libm::log(gamma));
    if k.is_finite() && k >= 1.0 {
        k as usize
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub state: usize,
    pub action: usize,
    /// Shaped reward.
    pub reward: f64,
    /// Behavior probability of `action` at `state`.
    pub mu_prob: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    /// State reached after the last step.
    pub bootstrap_state: usize,
    /// Temperature the behavior policy used for the whole episode.
    pub temperature: Option<Temperature>,
    /// Sum of shaped rewards.
    pub episode_return: f64,
    /// Sum of environment rewards before shaping.
    pub raw_return: f64,
    /// Parameter version the actor held when the episode finished.
    pub params_version: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_terminated(&self) -> bool {
        self.steps.last().is_some_and(|s| s.done)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::InvalidTrajectory("trajectory has no steps".into()));
        }
        let last = self.steps.len() - 1;
        for (t, step) in self.steps.iter().enumerate() {
            if !(step.mu_prob > 0.0 && step.mu_prob <= 1.0) {
                return Err(Error::InvalidTrajectory(alloc::format!(
                    "behavior probability at step {t} is {}, expected (0, 1]",
                    step.mu_prob
                )));
            }
            if step.done && t != last {
                return Err(Error::InvalidTrajectory(alloc::format!(
                    "done flag on step {t} before the final step"
                )));
            }
            if !step.reward.is_finite() {
                return Err(Error::InvalidTrajectory(alloc::format!("non-finite reward at step {t}")));
            }
        }
        Ok(())
    }
}

/// Clipped importance ratios along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedRatios {
    pub rho: Vec<f64>,
    pub c: Vec<f64>,
}

pub fn clipped_ratios(traj: &Trajectory, pi: &PolicyTable, cfg: &TraceConfig) -> Result<ClippedRatios> {
    cfg.validate()?;
    traj.validate()?;
    let n = traj.len();
    let mut rho = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for step in &traj.steps {
        if step.state >= pi.n_states() || step.action >= pi.n_actions() {
            return Err(Error::InvalidTrajectory(alloc::format!(
                "state/action ({}, {}) outside the policy table",
                step.state,
                step.action
            )));
        }
        let ratio = pi.prob(step.state, step.action) / step.mu_prob;
        rho.push(cfg.rho(ratio));
        c.push(cfg.c(ratio));
    }
    Ok(ClippedRatios { rho, c })
}

fn check_tables(traj: &Trajectory, n_states: usize) -> Result<()> {
    let bad = traj.steps.iter().any(|s| s.state >= n_states) || traj.bootstrap_state >= n_states;
    if bad {
        return Err(Error::InvalidTrajectory("state index outside the value table".into()));
    }
    Ok(())
}

/// Value of the state after step `t`: the next recorded state's value, or
/// the tail value after the last step.
fn next_state_values(traj: &Trajectory, v: &[f64], cfg: &TraceConfig) -> Vec<f64> {
    let n = traj.len();
    let mut next = Vec::with_capacity(n);
    for t in 0..n - 1 {
        next.push(v[traj.steps[t + 1].state]);
    }
    next.push(if traj.is_terminated() || !cfg.bootstrap { 0.0 } else { v[traj.bootstrap_state] });
    next
}

/// `Q(s_{t+1}, a_{t+1})` for every step, with `E_pi[Q(s_T, .)]` standing in
/// for the action that was never taken after a truncated trajectory.
fn next_action_values(traj: &Trajectory, q: &StateActionTable, pi: &PolicyTable, cfg: &TraceConfig) -> Vec<f64> {
    let n = traj.len();
    let mut next = Vec::with_capacity(n);
    for t in 0..n - 1 {
        let s = &traj.steps[t + 1];
        next.push(q.get(s.state, s.action));
    }
    let tail = if traj.is_terminated() || !cfg.bootstrap {
        0.0
    } else {
        let s = traj.bootstrap_state;
        q.row(s).iter().zip(pi.row(s)).map(|(q, p)| q * p).sum()
    };
    next.push(tail);
    next
}

/// `X_t = w_t delta_t + gamma c_t X_{t+1}`, `X_T = 0`.
fn backward_correction(deltas: &[f64], weights: &[f64], c: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for t in (0..deltas.len()).rev() {
        acc = weights[t] * deltas[t] + gamma * c[t] * acc;
        out[t] = acc;
    }
    out
}

/// V-Trace: `vs_t = V(s_t) + sum_k gamma^k c[t:t+k-1] rho_{t+k} delta^V_{t+k}`
/// with `delta^V_u = r_u + gamma V(s_{u+1}) - V(s_u)`.
pub fn vtrace_targets(traj: &Trajectory, v: &[f64], pi: &PolicyTable, cfg: &TraceConfig) -> Result<Vec<f64>> {
    let ratios = clipped_ratios(traj, pi, cfg)?;
    check_tables(traj, v.len())?;
    let next_v = next_state_values(traj, v, cfg);
    let deltas: Vec<f64> = traj
        .steps
        .iter()
        .zip(&next_v)
        .map(|(s, nv)| s.reward + cfg.gamma * nv - v[s.state])
        .collect();
    let corr = backward_correction(&deltas, &ratios.rho, &ratios.c, cfg.gamma);
    Ok(traj.steps.iter().zip(corr).map(|(s, x)| v[s.state] + x).collect())
}

/// ReTrace: `qs_t = Q_t + sum_k gamma^k c[t+1:t+k] delta^Q_{t+k}` with
/// `delta^Q_u = r_u + gamma Q(s_{u+1}, a_{u+1}) - Q(s_u, a_u)`.
pub fn retrace_targets(
    traj: &Trajectory,
    q: &StateActionTable,
    pi: &PolicyTable,
    cfg: &TraceConfig,
) -> Result<Vec<f64>> {
    let ratios = clipped_ratios(traj, pi, cfg)?;
    check_tables(traj, q.n_states())?;
    let next_q = next_action_values(traj, q, pi, cfg);
    let n = traj.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let s = &traj.steps[t];
        let q_t = q.get(s.state, s.action);
        let delta = s.reward + cfg.gamma * next_q[t] - q_t;
        let c_next = if t + 1 < n { ratios.c[t + 1] } else { 0.0 };
        acc = delta + cfg.gamma * c_next * acc;
        out[t] = q_t + acc;
    }
    Ok(out)
}

fn dr_deltas(traj: &Trajectory, v: &[f64], q: &StateActionTable, cfg: &TraceConfig) -> Vec<f64> {
    let next_v = next_state_values(traj, v, cfg);
    traj.steps
        .iter()
        .zip(&next_v)
        .map(|(s, nv)| s.reward + cfg.gamma * nv - q.get(s.state, s.action))
        .collect()
}

/// DR-trace, V form: `vs_t = V(s_t) + sum_k gamma^k c[t:t+k-1] rho_{t+k}
/// delta^DR_{t+k}` with `delta^DR_u = r_u + gamma V(s_{u+1}) - Q(s_u, a_u)`.
pub fn drtrace_v_targets(
    traj: &Trajectory,
    v: &[f64],
    q: &StateActionTable,
    pi: &PolicyTable,
    cfg: &TraceConfig,
) -> Result<Vec<f64>> {
    let ratios = clipped_ratios(traj, pi, cfg)?;
    check_tables(traj, v.len())?;
    check_tables(traj, q.n_states())?;
    let deltas = dr_deltas(traj, v, q, cfg);
    let corr = backward_correction(&deltas, &ratios.rho, &ratios.c, cfg.gamma);
    Ok(traj.steps.iter().zip(corr).map(|(s, x)| v[s.state] + x).collect())
}

/// DR-trace, Q form: `qs_t = Q_t + sum_k gamma^k c[t+1:t+k-1] rho~_{t,k}
/// delta^DR_{t+k}` with `rho~_{t,0} = 1`, `rho~_{t,k} = rho_{t+k}`.
pub fn drtrace_q_targets(
    traj: &Trajectory,
    v: &[f64],
    q: &StateActionTable,
    pi: &PolicyTable,
    cfg: &TraceConfig,
) -> Result<Vec<f64>> {
    let ratios = clipped_ratios(traj, pi, cfg)?;
    check_tables(traj, v.len())?;
    check_tables(traj, q.n_states())?;
    let deltas = dr_deltas(traj, v, q, cfg);
    let corr = backward_correction(&deltas, &ratios.rho, &ratios.c, cfg.gamma);
    let n = traj.len();
    Ok((0..n)
        .map(|t| {
            let s = &traj.steps[t];
            let tail = if t + 1 < n { corr[t + 1] } else { 0.0 };
            q.get(s.state, s.action) + deltas[t] + cfg.gamma * tail
        })
        .collect())
}

/// The DR-trace Q-form weights applied to the action-value residual
/// `r_u + gamma Q(s_{u+1}, a_{u+1}) - Q(s_u, a_u)`. This is the Q target of
/// the `no_drtrace` ablation.
pub fn q_residual_targets(
    traj: &Trajectory,
    q: &StateActionTable,
    pi: &PolicyTable,
    cfg: &TraceConfig,
) -> Result<Vec<f64>> {
    let ratios = clipped_ratios(traj, pi, cfg)?;
    check_tables(traj, q.n_states())?;
    let next_q = next_action_values(traj, q, pi, cfg);
    let deltas: Vec<f64> = traj
        .steps
        .iter()
        .zip(&next_q)
        .map(|(s, nq)| s.reward + cfg.gamma * nq - q.get(s.state, s.action))
        .collect();
    let corr = backward_correction(&deltas, &ratios.rho, &ratios.c, cfg.gamma);
    let n = traj.len();
    Ok((0..n)
        .map(|t| {
            let s = &traj.steps[t];
            let tail = if t + 1 < n { corr[t + 1] } else { 0.0 };
            q.get(s.state, s.action) + deltas[t] + cfg.gamma * tail
        })
        .collect())
}
