//! Tabular environments, exact policy evaluation, the clipped target policy,
//! episode sampling, and reward shaping.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::invalid;
use crate::linalg;
use crate::policy::{PolicyDistribution, Temperature};
use crate::table::{PolicyTable, StateActionTable};
use crate::traces::{StepRecord, Trajectory};
use crate::{Error, Result};

/// Discount used by the built-in environments.
pub const BUILTIN_GAMMA: f64 = 0.997;

const ROW_TOLERANCE: f64 = 1e-12;

/// A finite MDP with an explicit transition tensor.
///
/// Terminal states are absorbing with zero reward: the constructor rewrites
/// their transition rows to self-loops and their rewards to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `P[s][a][s']`, flattened row-major.
    transitions: Vec<f64>,
    rewards: StateActionTable,
    gamma: f64,
    terminal: Vec<bool>,
    initial: Vec<f64>,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: StateActionTable,
        gamma: f64,
        terminal: Vec<bool>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(invalid!("an MDP needs at least one state and one action"));
        }
        if transitions.len() != n_states * n_actions * n_states {
            return Err(invalid!(
                "transition tensor has {} entries, expected {}",
                transitions.len(),
                n_states * n_actions * n_states
            ));
        }
        if rewards.n_states() != n_states || rewards.n_actions() != n_actions {
            return Err(invalid!("reward table shape does not match the MDP"));
        }
        if rewards.as_slice().iter().any(|r| !r.is_finite()) {
            return Err(invalid!("rewards must be finite"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid!("discount must lie in (0, 1), got {gamma}"));
        }
        if terminal.len() != n_states || initial.len() != n_states {
            return Err(invalid!("terminal flags and initial distribution need one entry per state"));
        }
        PolicyDistribution::validate(&initial).map_err(|_| invalid!("initial distribution is not a distribution"))?;
        if initial.iter().zip(&terminal).any(|(p, t)| *t && *p > 0.0) {
            return Err(invalid!("initial distribution puts mass on a terminal state"));
        }
        let mut mdp = Self { n_states, n_actions, transitions, rewards, gamma, terminal, initial };
        for s in 0..n_states {
            for a in 0..n_actions {
                if mdp.terminal[s] {
                    let row = mdp.row_mut(s, a);
                    row.fill(0.0);
                    row[s] = 1.0;
                    mdp.rewards.set(s, a, 0.0);
                } else {
                    let row = mdp.transition(s, a);
                    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        return Err(invalid!("transition row ({s}, {a}) has a negative or non-finite entry"));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_TOLERANCE {
                        return Err(invalid!("transition row ({s}, {a}) sums to {sum}"));
                    }
                }
            }
        }
        Ok(mdp)
    }

    /// A random MDP with dense transitions; the last state is terminal when
    /// `with_terminal` is set (and `n_states >= 2`).
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        with_terminal: bool,
    ) -> Result<Self> {
        let with_terminal = with_terminal && n_states >= 2;
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let row: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 0.05).collect();
            let z: f64 = row.iter().sum();
            transitions.extend(row.into_iter().map(|p| p / z));
        }
        let rewards = StateActionTable::from_fn(n_states, n_actions, |_, _| 2.0 * rng.random::<f64>() - 1.0);
        let mut terminal = vec![false; n_states];
        let mut initial = vec![1.0; n_states];
        if with_terminal {
            terminal[n_states - 1] = true;
            initial[n_states - 1] = 0.0;
        }
        let z: f64 = initial.iter().sum();
        initial.iter_mut().for_each(|p| *p /= z);
        Self::new(n_states, n_actions, transitions, rewards, gamma, terminal, initial)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `P[s][a][.]`.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    fn row_mut(&mut self, s: usize, a: usize) -> &mut [f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &mut self.transitions[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards.get(s, a)
    }

    pub fn rewards(&self) -> &StateActionTable {
        &self.rewards
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_states(&self) -> &[bool] {
        &self.terminal
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid!("discount must lie in (0, 1), got {gamma}"));
        }
        let mut out = self.clone();
        out.gamma = gamma;
        Ok(out)
    }

    /// The same MDP with every reward passed through [`shaped_reward`], which
    /// is what a learner sees from [`sample_episode`].
    pub fn shaped(&self) -> Self {
        let mut out = self.clone();
        let data = self.rewards.as_slice().iter().map(|r| shaped_reward(*r)).collect();
        out.rewards = StateActionTable::from_vec(self.n_states, self.n_actions, data).expect("same shape");
        out
    }

    fn check_policy(&self, pi: &PolicyTable) -> Result<()> {
        if pi.n_states() != self.n_states || pi.n_actions() != self.n_actions {
            return Err(invalid!(
                "policy is {}x{}, MDP is {}x{}",
                pi.n_states(),
                pi.n_actions(),
                self.n_states,
                self.n_actions
            ));
        }
        Ok(())
    }

    /// `Q[s][a] = R[s][a] + gamma sum_s' P[s][a][s'] V[s']`.
    pub fn q_from_values(&self, v: &[f64]) -> StateActionTable {
        StateActionTable::from_fn(self.n_states, self.n_actions, |s, a| {
            let next: f64 = self.transition(s, a).iter().zip(v).map(|(p, v)| p * v).sum();
            self.reward(s, a) + self.gamma * next
        })
    }
}

/// Exact `(V^pi, Q^pi)` from the linear system `(I - gamma P_pi) V = R_pi`.
pub fn exact_policy_values(mdp: &TabularMdp, pi: &PolicyTable) -> Result<(Vec<f64>, StateActionTable)> {
    mdp.check_policy(pi)?;
    let n = mdp.n_states;
    let mut m = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        m[s * n + s] += 1.0;
        for a in 0..mdp.n_actions {
            let p = pi.prob(s, a);
            b[s] += p * mdp.reward(s, a);
            for (s2, t) in mdp.transition(s, a).iter().enumerate() {
                m[s * n + s2] -= mdp.gamma * p * t;
            }
        }
    }
    let v = linalg::solve(n, &m, &b)?;
    let q = mdp.q_from_values(&v);
    Ok((v, q))
}

/// Iterative policy evaluation, stopped once successive sweeps differ by at
/// most `tol` in sup-norm.
pub fn iterative_policy_values(mdp: &TabularMdp, pi: &PolicyTable, tol: f64, max_sweeps: usize) -> Result<Vec<f64>> {
    mdp.check_policy(pi)?;
    let mut v = vec![0.0; mdp.n_states];
    for _ in 0..max_sweeps {
        let q = mdp.q_from_values(&v);
        let next = q.expectation_under(pi);
        let diff = linalg::sup_distance(&next, &v);
        v = next;
        if diff <= tol {
            return Ok(v);
        }
    }
    Err(Error::Degenerate("policy evaluation did not converge".to_string()))
}

/// Optimal `(V*, Q*)` by value iteration.
pub fn optimal_values(mdp: &TabularMdp, tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, StateActionTable)> {
    let mut v = vec![0.0; mdp.n_states];
    for _ in 0..max_sweeps {
        let q = mdp.q_from_values(&v);
        let next: Vec<f64> = (0..mdp.n_states)
            .map(|s| q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let diff = linalg::sup_distance(&next, &v);
        v = next;
        if diff <= tol {
            let q = mdp.q_from_values(&v);
            return Ok((v, q));
        }
    }
    Err(Error::Degenerate("value iteration did not converge".to_string()))
}

/// Deterministic policy picking the first maximizer of each row.
pub fn greedy_policy(table: &StateActionTable) -> PolicyTable {
    let rows: Vec<PolicyDistribution> = (0..table.n_states())
        .map(|s| {
            let row = table.row(s);
            let best = argmax(row);
            PolicyDistribution::one_hot(row.len(), best).expect("index in range")
        })
        .collect();
    PolicyTable::from_rows(&rows).expect("valid rows")
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `pi~(a|s) = min(rho_bar mu(a|s), pi(a|s)) / sum_b min(rho_bar mu(b|s), pi(b|s))`.
pub fn clipped_target_policy(pi: &PolicyTable, mu: &PolicyTable, rho_bar: f64) -> Result<PolicyTable> {
    if rho_bar.is_nan() || rho_bar <= 0.0 {
        return Err(invalid!("rho_bar must be positive, got {rho_bar}"));
    }
    if pi.n_states() != mu.n_states() || pi.n_actions() != mu.n_actions() {
        return Err(invalid!("target and behavior policies have different shapes"));
    }
    let n_actions = pi.n_actions();
    let mut probs = Vec::with_capacity(pi.as_slice().len());
    for s in 0..pi.n_states() {
        // mu = 0 gives weight 0 for every finite rho_bar, so the infinite
        // clip keeps that limit instead of evaluating inf * 0.
        let row: Vec<f64> = pi
            .row(s)
            .iter()
            .zip(mu.row(s))
            .map(|(p, m)| if *m == 0.0 { 0.0 } else { p.min(rho_bar * m) })
            .collect();
        let z: f64 = row.iter().sum();
        if z <= 0.0 {
            return Err(Error::Degenerate(alloc::format!(
                "target and behavior policies share no support at state {s}"
            )));
        }
        probs.extend(row.into_iter().map(|p| p / z));
    }
    PolicyTable::from_vec(pi.n_states(), n_actions, probs)
}

/// `ln(|r| + 1)`, doubled for non-negative rewards.
pub fn shaped_reward(r: f64) -> f64 {
    let magnitude = libm::log1p(libm::fabs(r));
    if r >= 0.0 {
        2.0 * magnitude
    } else {
        -magnitude
    }
}

/// Draws an initial state.
pub fn sample_initial_state<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> usize {
    let dist = PolicyDistribution::new_unchecked(mdp.initial.clone());
    dist.sample_with(rng.random::<f64>())
}

/// Rolls one episode from an initial state drawn from the MDP.
///
/// `behavior` maps a state to the action distribution to sample from. Stops
/// on entering a terminal state (`done`) or after `max_steps` steps, in which
/// case the last step is not `done` and `bootstrap_state` is where the
/// episode was cut.
pub fn sample_episode<R, F>(
    mdp: &TabularMdp,
    behavior: F,
    tau: Option<Temperature>,
    rng: &mut R,
    max_steps: usize,
) -> Result<Trajectory>
where
    R: Rng + ?Sized,
    F: FnMut(usize) -> PolicyDistribution,
{
    let start = sample_initial_state(mdp, rng);
    sample_episode_from(mdp, start, behavior, tau, rng, max_steps)
}

/// [`sample_episode`] from a fixed, non-terminal start state.
pub fn sample_episode_from<R, F>(
    mdp: &TabularMdp,
    start: usize,
    mut behavior: F,
    tau: Option<Temperature>,
    rng: &mut R,
    max_steps: usize,
) -> Result<Trajectory>
where
    R: Rng + ?Sized,
    F: FnMut(usize) -> PolicyDistribution,
{
    if max_steps == 0 {
        return Err(invalid!("max_steps must be at least 1"));
    }
    if start >= mdp.n_states || mdp.terminal[start] {
        return Err(invalid!("start state {start} is out of range or terminal"));
    }
    let mut steps = Vec::new();
    let mut state = start;
    let mut episode_return = 0.0;
    let mut raw_return = 0.0;
    loop {
        let dist = behavior(state);
        if dist.len() != mdp.n_actions {
            return Err(invalid!("behavior returned {} actions, MDP has {}", dist.len(), mdp.n_actions));
        }
        let action = dist.sample_with(rng.random::<f64>());
        let mu_prob = dist.probs()[action];
        let raw = mdp.reward(state, action);
        let reward = shaped_reward(raw);
        let next = PolicyDistribution::new_unchecked(mdp.transition(state, action).to_vec())
            .sample_with(rng.random::<f64>());
        let done = mdp.terminal[next];
        episode_return += reward;
        raw_return += raw;
        steps.push(StepRecord { state, action, reward, mu_prob, done });
        state = next;
        if done || steps.len() >= max_steps {
            break;
        }
    }
    Ok(Trajectory { steps, bootstrap_state: state, temperature: tau, episode_return, raw_return, params_version: 0 })
}

/// Builds a named environment: `chain-N`, `gridworld-NxM`, or
/// `deceptive-chain-N`.
///
/// * `chain-N` (N >= 2): actions 0 = left, 1 = right; start at 0, moving left
///   from 0 stays put; entering the terminal state N-1 pays +1.
/// * `gridworld-NxM` (N, M >= 1, N*M >= 2): state `row * M + col`; actions
///   0 = up, 1 = right, 2 = down, 3 = left, bumping into a wall stays put;
///   start at (0, 0); entering the terminal goal (N-1, M-1) pays +1.
/// * `deceptive-chain-N` (N >= 3): actions 0 = left, 1 = right; start at 1;
///   both ends are terminal; entering 0 pays +1 and entering N-1 pays +10.
///
/// All use discount [`BUILTIN_GAMMA`].
pub fn builtin_environment(name: &str) -> Result<TabularMdp> {
    let not_found = || Error::NotFound(alloc::format!("unknown environment '{name}'"));
    let parse = |s: &str| s.parse::<usize>().map_err(|_| not_found());
    if let Some(n) = name.strip_prefix("deceptive-chain-") {
        let n = parse(n)?;
        if n < 3 {
            return Err(invalid!("deceptive-chain needs at least 3 states"));
        }
        deceptive_chain(n)
    } else if let Some(n) = name.strip_prefix("chain-") {
        let n = parse(n)?;
        if n < 2 {
            return Err(invalid!("chain needs at least 2 states"));
        }
        chain(n)
    } else if let Some(dims) = name.strip_prefix("gridworld-") {
        let (rows, cols) = dims.split_once('x').ok_or_else(not_found)?;
        let (rows, cols) = (parse(rows)?, parse(cols)?);
        if rows == 0 || cols == 0 || rows * cols < 2 {
            return Err(invalid!("gridworld needs at least 2 cells"));
        }
        gridworld(rows, cols)
    } else {
        Err(not_found())
    }
}

/// Deterministic-transition MDP from a successor function.
fn deterministic(
    n_states: usize,
    n_actions: usize,
    start: usize,
    terminal: Vec<bool>,
    step: impl Fn(usize, usize) -> (usize, f64),
) -> Result<TabularMdp> {
    let mut transitions = vec![0.0; n_states * n_actions * n_states];
    let mut rewards = StateActionTable::zeros(n_states, n_actions);
    for s in 0..n_states {
        for a in 0..n_actions {
            let (next, r) = step(s, a);
            transitions[(s * n_actions + a) * n_states + next] = 1.0;
            rewards.set(s, a, r);
        }
    }
    let mut initial = vec![0.0; n_states];
    initial[start] = 1.0;
    TabularMdp::new(n_states, n_actions, transitions, rewards, BUILTIN_GAMMA, terminal, initial)
}

fn chain(n: usize) -> Result<TabularMdp> {
    let mut terminal = vec![false; n];
    terminal[n - 1] = true;
    deterministic(n, 2, 0, terminal, |s, a| {
        let next = if a == 0 { s.saturating_sub(1) } else { (s + 1).min(n - 1) };
        (next, if next == n - 1 { 1.0 } else { 0.0 })
    })
}

fn deceptive_chain(n: usize) -> Result<TabularMdp> {
    let mut terminal = vec![false; n];
    terminal[0] = true;
    terminal[n - 1] = true;
    deterministic(n, 2, 1, terminal, |s, a| {
        let next = if a == 0 { s.saturating_sub(1) } else { (s + 1).min(n - 1) };
        let r = if next == 0 {
            1.0
        } else if next == n - 1 {
            10.0
        } else {
            0.0
        };
        (next, r)
    })
}

fn gridworld(rows: usize, cols: usize) -> Result<TabularMdp> {
    let n = rows * cols;
    let mut terminal = vec![false; n];
    terminal[n - 1] = true;
    deterministic(n, 4, 0, terminal, |s, a| {
        let (r, c) = (s / cols, s % cols);
        let (r, c) = match a {
            0 => (r.saturating_sub(1), c),
            1 => (r, (c + 1).min(cols - 1)),
            2 => ((r + 1).min(rows - 1), c),
            _ => (r, c.saturating_sub(1)),
        };
        let next = r * cols + c;
        (next, if next == n - 1 { 1.0 } else { 0.0 })
    })
}

/// A random policy with every action probability at least
/// `floor / n_actions`-ish, so ratios against it stay bounded.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, floor: f64) -> PolicyTable {
    let mut probs = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        let row: Vec<f64> = (0..n_actions).map(|_| rng.random::<f64>() + floor).collect();
        let z: f64 = row.iter().sum();
        probs.extend(row.into_iter().map(|p| p / z));
    }
    PolicyTable::from_vec(n_states, n_actions, probs).expect("normalized rows")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_state(r: f64, gamma: f64) -> TabularMdp {
        TabularMdp::new(1, 1, vec![1.0], StateActionTable::from_vec(1, 1, vec![r]).unwrap(), gamma, vec![false], vec![1.0])
            .unwrap()
    }

    #[test]
    fn geometric_series() {
        let (v, q) = exact_policy_values(&single_state(1.0, 0.9), &PolicyTable::uniform(1, 1)).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-12);
        assert!((q.get(0, 0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn myopic_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mdp = TabularMdp::random(&mut rng, 4, 3, 1e-12, false).unwrap();
        let pi = random_policy(&mut rng, 4, 3, 0.1);
        let (v, _) = exact_policy_values(&mdp, &pi).unwrap();
        let myopic = mdp.rewards().expectation_under(&pi);
        assert!(linalg::sup_distance(&v, &myopic) < 1e-10);
    }

    #[test]
    fn linear_solve_matches_iteration_and_bellman() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mdp = TabularMdp::random(&mut rng, 5, 3, 0.9, true).unwrap();
            let pi = random_policy(&mut rng, 5, 3, 0.1);
            let (v, q) = exact_policy_values(&mdp, &pi).unwrap();
            let it = iterative_policy_values(&mdp, &pi, 1e-13, 100_000).unwrap();
            assert!(linalg::sup_distance(&v, &it) < 1e-11);
            let backup = q.expectation_under(&pi);
            assert!(linalg::sup_distance(&v, &backup) < 1e-10);
            assert_eq!(v[4], 0.0);
        }
    }

    #[test]
    fn clipped_policy_examples() {
        let pi = PolicyTable::from_vec(1, 2, vec![0.9, 0.1]).unwrap();
        let mu = PolicyTable::uniform(1, 2);
        let t = clipped_target_policy(&pi, &mu, 1.05).unwrap();
        assert!((t.prob(0, 0) - 0.84).abs() < 1e-12);
        assert!((t.prob(0, 1) - 0.16).abs() < 1e-12);
        assert_eq!(clipped_target_policy(&pi, &pi, 1.05).unwrap(), pi);
        let big = clipped_target_policy(&pi, &mu, 1e12).unwrap();
        assert!(linalg::sup_distance(big.as_slice(), pi.as_slice()) < 1e-9);
        let inf = clipped_target_policy(&pi, &mu, f64::INFINITY).unwrap();
        assert_eq!(inf, pi);
        assert!(clipped_target_policy(&pi, &mu, 0.0).is_err());
        let disjoint = PolicyTable::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let other = PolicyTable::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        assert!(matches!(clipped_target_policy(&disjoint, &other, 2.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn shaping_examples() {
        let e1 = core::f64::consts::E - 1.0;
        assert_eq!(shaped_reward(0.0), 0.0);
        assert!((shaped_reward(e1) - 2.0).abs() < 1e-15);
        assert!((shaped_reward(-e1) + 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn shaping_is_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(shaped_reward(lo) <= shaped_reward(hi));
        }

        #[test]
        fn shaping_weights_gains_twice_losses(r in 0.0f64..1e6) {
            prop_assert!((shaped_reward(r) + 2.0 * shaped_reward(-r)).abs() <= 1e-12 * (1.0 + r.abs()));
        }

        #[test]
        fn clipped_rows_are_distributions(seed in any::<u64>(), rho_bar in 0.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pi = random_policy(&mut rng, 3, 3, 0.01);
            let mu = random_policy(&mut rng, 3, 3, 0.01);
            let t = clipped_target_policy(&pi, &mu, rho_bar).unwrap();
            for s in 0..3 {
                let sum: f64 = t.row(s).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                let covered = (0..3).all(|a| rho_bar * mu.prob(s, a) >= pi.prob(s, a));
                if covered {
                    for a in 0..3 {
                        prop_assert!((t.prob(s, a) - pi.prob(s, a)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn builtin_chain() {
        let mdp = builtin_environment("chain-3").unwrap();
        assert_eq!((mdp.n_states(), mdp.n_actions()), (3, 2));
        assert_eq!(mdp.transition(0, 0), &[1.0, 0.0, 0.0]);
        assert_eq!(mdp.transition(0, 1), &[0.0, 1.0, 0.0]);
        assert_eq!(mdp.reward(1, 1), 1.0);
        assert_eq!(mdp.reward(0, 1), 0.0);
        assert!(mdp.is_terminal(2));
        assert_eq!(mdp.initial_distribution(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn builtin_names() {
        assert!(matches!(builtin_environment("maze-3"), Err(Error::NotFound(_))));
        assert!(matches!(builtin_environment("chain-x"), Err(Error::NotFound(_))));
        assert!(matches!(builtin_environment("gridworld-4"), Err(Error::NotFound(_))));
        assert!(builtin_environment("chain-1").is_err());
        let g = builtin_environment("gridworld-2x3").unwrap();
        assert_eq!((g.n_states(), g.n_actions()), (6, 4));
        assert!(g.is_terminal(5));
    }

    #[test]
    fn gridworld_optimal_values() {
        let mdp = builtin_environment("gridworld-4x4").unwrap();
        let (v, q) = optimal_values(&mdp, 1e-13, 100_000).unwrap();
        // Manhattan distance d to the goal: the goal is entered after d steps.
        for s in 0..15 {
            let d = (3 - s / 4) + (3 - s % 4);
            assert!((v[s] - libm::pow(BUILTIN_GAMMA, (d - 1) as f64)).abs() < 1e-10, "state {s}");
        }
        let (v_greedy, _) = exact_policy_values(&mdp, &greedy_policy(&q)).unwrap();
        assert!(linalg::sup_distance(&v, &v_greedy) < 1e-9);
    }

    #[test]
    fn deceptive_chain_rewards_patience() {
        let mdp = builtin_environment("deceptive-chain-10").unwrap();
        let left = PolicyTable::from_vec(10, 2, [1.0, 0.0].repeat(10)).unwrap();
        let right = PolicyTable::from_vec(10, 2, [0.0, 1.0].repeat(10)).unwrap();
        let (v_left, _) = exact_policy_values(&mdp, &left).unwrap();
        let (v_right, _) = exact_policy_values(&mdp, &right).unwrap();
        assert!((v_left[1] - 1.0).abs() < 1e-12);
        assert!((v_right[1] - 10.0 * libm::pow(BUILTIN_GAMMA, 7.0)).abs() < 1e-9);
        let (v_opt, _) = optimal_values(&mdp, 1e-13, 100_000).unwrap();
        assert!(v_left[1] < v_opt[1]);
    }

    #[test]
    fn constructor_rejects_malformed_input() {
        let r = StateActionTable::zeros(2, 1);
        assert!(TabularMdp::new(2, 1, vec![0.5, 0.4, 0.0, 1.0], r.clone(), 0.9, vec![false; 2], vec![1.0, 0.0]).is_err());
        assert!(TabularMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], r.clone(), 1.0, vec![false; 2], vec![1.0, 0.0]).is_err());
        assert!(TabularMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], r, 0.9, vec![true, false], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn terminal_rows_are_absorbing() {
        let r = StateActionTable::from_vec(2, 1, vec![1.0, 5.0]).unwrap();
        let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], r, 0.9, vec![false, true], vec![1.0, 0.0]).unwrap();
        assert_eq!(mdp.transition(1, 0), &[0.0, 1.0]);
        assert_eq!(mdp.reward(1, 0), 0.0);
    }

    #[test]
    fn deterministic_rollout() {
        let mdp = builtin_environment("chain-3").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let right = |_| PolicyDistribution::one_hot(2, 1).unwrap();
        let t = sample_episode(&mdp, right, Some(Temperature::ONE), &mut rng, 10).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!((t.steps[0].state, t.steps[0].action, t.steps[0].done), (0, 1, false));
        assert_eq!((t.steps[1].state, t.steps[1].action, t.steps[1].done), (1, 1, true));
        assert_eq!(t.steps[1].reward, shaped_reward(1.0));
        assert_eq!(t.raw_return, 1.0);
        assert_eq!(t.bootstrap_state, 2);
    }

    #[test]
    fn truncated_rollout() {
        let mdp = builtin_environment("chain-5").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let left = |_| PolicyDistribution::one_hot(2, 0).unwrap();
        let t = sample_episode(&mdp, left, None, &mut rng, 3).unwrap();
        assert_eq!(t.len(), 3);
        assert!(!t.is_terminated());
        assert_eq!(t.bootstrap_state, 0);
        assert!(sample_episode(&mdp, left, None, &mut rng, 0).is_err());
    }

    #[test]
    fn action_frequencies_match_behavior() {
        let mdp = builtin_environment("chain-3").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mu = PolicyDistribution::new(vec![0.3, 0.7]).unwrap();
        let n = 100_000;
        let mut rights = 0usize;
        for _ in 0..n {
            let t = sample_episode(&mdp, |_| mu.clone(), None, &mut rng, 1).unwrap();
            rights += t.steps[0].action;
            assert_eq!(t.steps[0].mu_prob, mu.probs()[t.steps[0].action]);
        }
        let p_hat = rights as f64 / n as f64;
        let se = libm::sqrt(0.7 * 0.3 / n as f64);
        assert!((p_hat - 0.7).abs() < 3.0 * se, "{p_hat}");
    }
}
