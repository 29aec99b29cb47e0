//! DR-trace operators evaluated in expectation on a tabular MDP.
//!
//! With the expected residual `d(s, a) = R(s, a) + gamma E[V(s')] - Q(s, a)`
//! (zero on terminal pairs, `V = 0` on terminal successors) both operators are
//! affine in `d`:
//!
//! * `T(Q)(s, a) = Q(s, a) + sum_k gamma^k E[c[t+1:t+k-1] rho~_{t,k} d_{t+k}]`
//!   starting from the pair `(s, a)`, with `rho~_{t,0} = 1`;
//! * `S(V)(s) = V(s) + sum_k gamma^k E[c[t:t+k-1] rho_{t+k} d_{t+k}]` starting
//!   from `s` with `a_t ~ mu`.
//!
//! The expectation over behavior trajectories is carried by forward dynamic
//! programming over ratio-weighted pair occupancies, so each operator reduces
//! to a precomputed kernel applied to `d`. The series is cut at
//! `TraceConfig::k_max` (or earlier once the remaining mass is below `1e-18`),
//! and every result carries a bound on the discarded tail.

use alloc::vec;
use alloc::vec::Vec;

use super::TraceConfig;
use crate::error::invalid;
use crate::linalg;
use crate::mdp::TabularMdp;
use crate::table::{PolicyTable, StateActionTable};
use crate::Result;

/// Remaining tail weight below which the expansion stops early.
const NEGLIGIBLE_TAIL: f64 = 1e-18;

/// An operator result with the bound on the truncated tail of its series.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated<T> {
    pub value: T,
    /// Upper bound on `|exact - value|` at every entry.
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointUpdate {
    pub q: StateActionTable,
    pub v: Vec<f64>,
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationResult {
    pub q: StateActionTable,
    pub v: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm change of `(Q, V)` in the last iteration.
    pub last_change: f64,
}

/// Precomputed affine kernels of the exact operators for one
/// `(mdp, mu, pi, cfg)`.
#[derive(Debug, Clone)]
pub struct ExactOperators {
    mdp: TabularMdp,
    pi: PolicyTable,
    /// `(SA) x (SA)` weights of `d` in `T(Q) - Q`.
    t_kernel: Vec<f64>,
    /// `S x (SA)` weights of `d` in `S(V) - V`.
    s_kernel: Vec<f64>,
    /// Tail bound per unit of `max |d|`.
    t_tail: f64,
    s_tail: f64,
}

impl ExactOperators {
    pub fn new(mdp: &TabularMdp, mu: &PolicyTable, pi: &PolicyTable, cfg: &TraceConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.k_max < 1 {
            return Err(invalid!("k_max must be at least 1"));
        }
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        for (name, p) in [("behavior", mu), ("target", pi)] {
            if p.n_states() != ns || p.n_actions() != na {
                return Err(invalid!("{name} policy shape does not match the MDP"));
            }
        }
        let mdp = mdp.with_gamma(cfg.gamma)?;
        let gamma = cfg.gamma;
        let n = ns * na;

        let mut rho = vec![0.0; n];
        let mut c = vec![0.0; n];
        for s in 0..ns {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..na {
                let m = mu.prob(s, a);
                if m > 0.0 {
                    let ratio = pi.prob(s, a) / m;
                    rho[s * na + a] = cfg.rho(ratio);
                    c[s * na + a] = cfg.c(ratio);
                }
            }
        }

        // kernel[p][p'] = P(s' | p) mu(a' | s'); terminal successors end the
        // trajectory.
        let mut kernel = vec![0.0; n * n];
        for p in 0..n {
            let (s, a) = (p / na, p % na);
            if mdp.is_terminal(s) {
                continue;
            }
            for (s2, prob) in mdp.transition(s, a).iter().enumerate() {
                if *prob == 0.0 || mdp.is_terminal(s2) {
                    continue;
                }
                for a2 in 0..na {
                    kernel[p * n + s2 * na + a2] = prob * mu.prob(s2, a2);
                }
            }
        }

        // S: occupancy starts at (s, a) with weight mu(a|s); term k weights
        // the residual by rho; each transition carries the ratio c.
        let mut occ = vec![0.0; ns * n];
        for s in 0..ns {
            if !mdp.is_terminal(s) {
                for a in 0..na {
                    occ[s * n + s * na + a] = mu.prob(s, a);
                }
            }
        }
        let (s_kernel, s_tail) = expand(occ, ns, n, &kernel, &rho, &c, gamma, 0, cfg.k_max);

        // T: the k = 0 term is the residual itself; from k = 1 the occupancy
        // is one kernel step from the starting pair, without a ratio on it.
        let (mut t_kernel, t_tail) = expand(kernel.clone(), n, n, &kernel, &rho, &c, gamma, 1, cfg.k_max);
        for p in 0..n {
            if !mdp.is_terminal(p / na) {
                t_kernel[p * n + p] += 1.0;
            }
        }

        Ok(Self { mdp, pi: pi.clone(), t_kernel, s_kernel, t_tail, s_tail })
    }

    fn check(&self, q: &StateActionTable, v: &[f64]) -> Result<()> {
        if q.n_states() != self.mdp.n_states() || q.n_actions() != self.mdp.n_actions() || v.len() != self.mdp.n_states()
        {
            return Err(invalid!("Q/V tables do not match the MDP"));
        }
        Ok(())
    }

    /// Expected DR residual per pair; 0 on terminal pairs.
    pub fn residual(&self, q: &StateActionTable, v: &[f64]) -> Result<Vec<f64>> {
        self.check(q, v)?;
        let (ns, na) = (self.mdp.n_states(), self.mdp.n_actions());
        let mut d = vec![0.0; ns * na];
        for s in 0..ns {
            if self.mdp.is_terminal(s) {
                continue;
            }
            for a in 0..na {
                let next: f64 = self
                    .mdp
                    .transition(s, a)
                    .iter()
                    .enumerate()
                    .filter(|(s2, _)| !self.mdp.is_terminal(*s2))
                    .map(|(s2, p)| p * v[s2])
                    .sum();
                d[s * na + a] = self.mdp.reward(s, a) + self.mdp.gamma() * next - q.get(s, a);
            }
        }
        Ok(d)
    }

    /// `T(Q)`, zero on terminal states.
    pub fn t(&self, q: &StateActionTable, v: &[f64]) -> Result<Truncated<StateActionTable>> {
        let d = self.residual(q, v)?;
        let (ns, na) = (self.mdp.n_states(), self.mdp.n_actions());
        let corr = linalg::mat_vec(ns * na, ns * na, &self.t_kernel, &d);
        let out = StateActionTable::from_fn(ns, na, |s, a| {
            if self.mdp.is_terminal(s) {
                0.0
            } else {
                q.get(s, a) + corr[s * na + a]
            }
        });
        Ok(Truncated { value: out, truncation_bound: self.t_tail * linalg::sup_norm(&d) })
    }

    /// `T~(Q) = T(Q) - E_pi[Q]`.
    pub fn t_tilde(&self, q: &StateActionTable, v: &[f64]) -> Result<Truncated<StateActionTable>> {
        let mut out = self.t(q, v)?;
        let eq = q.expectation_under(&self.pi);
        for s in 0..self.mdp.n_states() {
            if !self.mdp.is_terminal(s) {
                out.value.row_mut(s).iter_mut().for_each(|x| *x -= eq[s]);
            }
        }
        Ok(out)
    }

    /// `S(V)`, zero on terminal states.
    pub fn s(&self, q: &StateActionTable, v: &[f64]) -> Result<Truncated<Vec<f64>>> {
        let d = self.residual(q, v)?;
        let ns = self.mdp.n_states();
        let n = ns * self.mdp.n_actions();
        let corr = linalg::mat_vec(ns, n, &self.s_kernel, &d);
        let out = (0..ns).map(|s| if self.mdp.is_terminal(s) { 0.0 } else { v[s] + corr[s] }).collect();
        Ok(Truncated { value: out, truncation_bound: self.s_tail * linalg::sup_norm(&d) })
    }

    /// `U(Q, V) = (T(Q) - E_pi[Q] + S(V), S(V))`.
    pub fn u(&self, q: &StateActionTable, v: &[f64]) -> Result<JointUpdate> {
        let t = self.t_tilde(q, v)?;
        let s = self.s(q, v)?;
        let mut q_new = t.value;
        for st in 0..self.mdp.n_states() {
            if !self.mdp.is_terminal(st) {
                q_new.row_mut(st).iter_mut().for_each(|x| *x += s.value[st]);
            }
        }
        Ok(JointUpdate { q: q_new, v: s.value, truncation_bound: t.truncation_bound.max(s.truncation_bound) })
    }

    /// Replaces `Q` by `Q - E_pi[Q] + V`, the form in which the learner
    /// stores its action values (a centered advantage plus the state value).
    pub fn center_on_values(&self, q: &StateActionTable, v: &[f64]) -> StateActionTable {
        let eq = q.expectation_under(&self.pi);
        StateActionTable::from_fn(q.n_states(), q.n_actions(), |s, a| {
            if self.mdp.is_terminal(s) {
                0.0
            } else {
                q.get(s, a) - eq[s] + v[s]
            }
        })
    }

    /// Applies [`Self::u`] until the sup-norm change drops to `tol` or
    /// `max_iterations` is reached. With `center` set, every iterate is
    /// passed through [`Self::center_on_values`] first.
    pub fn iterate(
        &self,
        q0: &StateActionTable,
        v0: &[f64],
        max_iterations: usize,
        tol: f64,
        center: bool,
    ) -> Result<IterationResult> {
        self.check(q0, v0)?;
        let mut v = v0.to_vec();
        let mut q = if center { self.center_on_values(q0, &v) } else { q0.clone() };
        let mut last_change = f64::INFINITY;
        let mut iterations = 0;
        while iterations < max_iterations {
            let next = self.u(&q, &v)?;
            let next_q = if center { self.center_on_values(&next.q, &next.v) } else { next.q };
            last_change = next_q.sup_distance(&q).max(linalg::sup_distance(&next.v, &v));
            q = next_q;
            v = next.v;
            iterations += 1;
            if !last_change.is_finite() || last_change <= tol {
                break;
            }
        }
        Ok(IterationResult { q, v, iterations, last_change })
    }
}

/// Accumulates `sum_{k = k0}^{k_max} gamma^k W_k diag(rho)` where
/// `W_{k+1} = W_k diag(c) kernel` and `W_{k0} = start` (`rows x n`).
///
/// Returns the kernel and the tail factor: an upper bound on the discarded
/// terms per unit of residual. Row masses never grow (the `mu`-weighted mean
/// of `c` and of `rho` over actions is at most 1), so the tail after the last
/// kept term `k` is at most `gamma^(k+1) mass_k / (1 - gamma)`.
#[allow(clippy::too_many_arguments)]
fn expand(
    start: Vec<f64>,
    rows: usize,
    n: usize,
    kernel: &[f64],
    rho: &[f64],
    c: &[f64],
    gamma: f64,
    k0: usize,
    k_max: usize,
) -> (Vec<f64>, f64) {
    let mut acc = vec![0.0; rows * n];
    let mut w = start;
    let mut g = libm::pow(gamma, k0 as f64);
    let mut k = k0;
    loop {
        for r in 0..rows {
            for p in 0..n {
                acc[r * n + p] += g * w[r * n + p] * rho[p];
            }
        }
        let mass = (0..rows).map(|r| w[r * n..(r + 1) * n].iter().sum::<f64>()).fold(0.0, f64::max);
        let tail = g * gamma * mass / (1.0 - gamma);
        if k >= k_max || tail < NEGLIGIBLE_TAIL {
            return (acc, tail);
        }
        for r in 0..rows {
            for p in 0..n {
                w[r * n + p] *= c[p];
            }
        }
        w = linalg::mat_mul(rows, n, n, &w, kernel);
        g *= gamma;
        k += 1;
    }
}

/// `T(Q)` for one call; see [`ExactOperators`].
pub fn exact_t_operator(
    mdp: &TabularMdp,
    mu: &PolicyTable,
    pi: &PolicyTable,
    q: &StateActionTable,
    v: &[f64],
    cfg: &TraceConfig,
) -> Result<Truncated<StateActionTable>> {
    ExactOperators::new(mdp, mu, pi, cfg)?.t(q, v)
}

/// `S(V)` for one call; see [`ExactOperators`].
pub fn exact_s_operator(
    mdp: &TabularMdp,
    mu: &PolicyTable,
    pi: &PolicyTable,
    q: &StateActionTable,
    v: &[f64],
    cfg: &TraceConfig,
) -> Result<Truncated<Vec<f64>>> {
    ExactOperators::new(mdp, mu, pi, cfg)?.s(q, v)
}

/// `U(Q, V)` for one call; see [`ExactOperators`].
pub fn exact_u_operator(
    mdp: &TabularMdp,
    mu: &PolicyTable,
    pi: &PolicyTable,
    q: &StateActionTable,
    v: &[f64],
    cfg: &TraceConfig,
) -> Result<JointUpdate> {
    ExactOperators::new(mdp, mu, pi, cfg)?.u(q, v)
}
