//! The Boltzmann temperature family `pi_tau(v) ∝ exp(v / tau)` and the
//! small pieces of calculus around it.
//!
//! The learner parameterizes `Q = A - E_pi[A] + V` where the expectation and
//! the `V` summand are stop-gradient constants; [`centered_advantage`] and
//! [`q_from_advantage`] compute that forward pass and
//! [`centered_q_jacobian`] its exact tabular Jacobian under either routing.

use alloc::format;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::{Error, Result};

/// Smallest temperature the bandits can propose (`1/tau = 50`).
pub const TAU_MIN: f64 = 0.02;
/// Stand-in for `tau = inf`; the policy is uniform to machine precision here.
pub const TAU_MAX: f64 = 1e6;

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Temperature(f64);

impl Temperature {
    /// Any finite positive temperature. Use [`Temperature::clamped`] to force
    /// the value into `[TAU_MIN, TAU_MAX]`.
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(Self(tau))
        } else {
            Err(invalid!("temperature must be finite and positive, got {tau}"))
        }
    }

    /// Clamps into the search domain. Infinite input maps to `TAU_MAX`.
    pub fn clamped(tau: f64) -> Result<Self> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(invalid!("temperature must be positive, got {tau}"));
        }
        Ok(Self(tau.clamp(TAU_MIN, TAU_MAX)))
    }

    pub const ONE: Temperature = Temperature(1.0);

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn in_domain(self) -> bool {
        (TAU_MIN..=TAU_MAX).contains(&self.0)
    }
}

/// A probability vector over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution(Vec<f64>);

impl PolicyDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::validate(&probs)?;
        Ok(Self(probs))
    }

    pub(crate) fn new_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid!("distribution needs at least one action"));
        }
        Ok(Self(alloc::vec![1.0 / n as f64; n]))
    }

    pub fn one_hot(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(invalid!("one-hot index {index} out of range for {n} actions"));
        }
        let mut p = alloc::vec![0.0; n];
        p[index] = 1.0;
        Ok(Self(p))
    }

    pub(crate) fn validate(probs: &[f64]) -> Result<()> {
        if probs.is_empty() {
            return Err(invalid!("distribution needs at least one action"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid!("distribution entries must be finite and non-negative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid!("distribution sums to {sum}, not 1"));
        }
        Ok(())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `sum_a pi(a) v(a)`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.0.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Inverse-CDF draw from `u` in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding can leave `acc` a hair under 1; fall back to the last
        // action with positive mass.
        self.0.iter().rposition(|p| *p > 0.0).unwrap_or(self.0.len() - 1)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(invalid!("action values must be non-empty"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("action values must be finite"));
    }
    Ok(())
}

/// `softmax(values / tau)` computed with max-subtraction.
pub fn boltzmann_policy(values: &[f64], tau: Temperature) -> Result<PolicyDistribution> {
    check_finite(values)?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = values.iter().map(|v| libm::exp((v - max) / tau.0)).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(PolicyDistribution(probs))
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn entropy(pi: &PolicyDistribution) -> f64 {
    -pi.0.iter().filter(|p| **p > 0.0).map(|p| p * libm::log(*p)).sum::<f64>()
}

/// Finds the temperature whose Boltzmann policy has the requested entropy.
///
/// Entropy is strictly increasing in `tau` for non-constant `values`, so a
/// bisection on `ln tau` over `[ln TAU_MIN, ln TAU_MAX]` converges. Targets the
/// domain cannot reach are reported as out of range.
pub fn solve_temperature_for_entropy(values: &[f64], target: f64) -> Result<Temperature> {
    check_finite(values)?;
    let max_entropy = libm::log(values.len() as f64);
    let spread = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().copied().fold(f64::INFINITY, f64::min);
    if spread == 0.0 {
        return Err(Error::Degenerate(format!(
            "constant action values have entropy ln {} at every temperature",
            values.len()
        )));
    }
    if !(target > 0.0 && target < max_entropy) {
        return Err(Error::OutOfRange(format!(
            "entropy target {target} outside (0, {max_entropy})"
        )));
    }
    let h = |log_tau: f64| -> f64 {
        let pi = boltzmann_policy(values, Temperature(libm::exp(log_tau))).expect("finite input");
        entropy(&pi)
    };
    let (mut lo, mut hi) = (libm::log(TAU_MIN), libm::log(TAU_MAX));
    if target < h(lo) || target > h(hi) {
        return Err(Error::OutOfRange(format!(
            "entropy target {target} not reachable for tau in [{TAU_MIN}, {TAU_MAX}]"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let err = h(mid) - target;
        if err.abs() <= 1e-8 {
            break;
        }
        if err > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Temperature(libm::exp(mid)))
}

/// `A - E_pi[A]`.
pub fn centered_advantage(a_row: &[f64], pi: &PolicyDistribution) -> Result<Vec<f64>> {
    if a_row.len() != pi.len() {
        return Err(invalid!(
            "advantage row has {} actions, policy has {}",
            a_row.len(),
            pi.len()
        ));
    }
    let mean = pi.expectation(a_row);
    Ok(a_row.iter().map(|a| a - mean).collect())
}

/// `Q(a) = A_bar(a) + V`.
pub fn q_from_advantage(a_bar: &[f64], v: f64) -> Vec<f64> {
    a_bar.iter().map(|a| a + v).collect()
}

/// Jacobian `dQ(a)/dA(b)` of `Q = A - pi(A / tau) . A + V` as a row-major
/// `|A| x |A|` matrix.
///
/// With `stop_pi` the policy in the subtracted expectation is a constant and
/// the Jacobian is `1{a = b} - pi(b)`. Without it the policy's own
/// dependence on `A` adds `-pi(b) (A(b) - E_pi[A]) / tau` to every row.
pub fn centered_q_jacobian(a_row: &[f64], tau: Temperature, stop_pi: bool) -> Result<Vec<f64>> {
    let pi = boltzmann_policy(a_row, tau)?;
    let a_bar = centered_advantage(a_row, &pi)?;
    let n = a_row.len();
    let mut jac = alloc::vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let mut d = if a == b { 1.0 } else { 0.0 } - pi.0[b];
            if !stop_pi {
                d -= pi.0[b] * a_bar[b] / tau.0;
            }
            jac[a * n + b] = d;
        }
    }
    Ok(jac)
}

/// `sum_a pi(a) (Q(a) - V) d log pi(a) / dA`, with `Q - V` the centered
/// advantage. Equals `pi(b) A_bar(b) / tau` componentwise, which is
/// `-tau` times the entropy gradient.
pub fn score_weighted_advantage(a_row: &[f64], tau: Temperature) -> Result<Vec<f64>> {
    let pi = boltzmann_policy(a_row, tau)?;
    let a_bar = centered_advantage(a_row, &pi)?;
    let n = a_row.len();
    let mut out = alloc::vec![0.0; n];
    for (a, (&p, &adv)) in pi.0.iter().zip(&a_bar).enumerate() {
        // d log pi(a) / dA(b) = (1{a = b} - pi(b)) / tau
        for (b, o) in out.iter_mut().enumerate() {
            let d = (if a == b { 1.0 } else { 0.0 } - pi.0[b]) / tau.0;
            *o += p * adv * d;
        }
    }
    Ok(out)
}

/// `E_{pi_tau}[v]`.
pub fn expected_value(values: &[f64], tau: Temperature) -> Result<f64> {
    Ok(boltzmann_policy(values, tau)?.expectation(values))
}

/// `d/dtau E_{pi_tau}[v] = -Var_{pi_tau}[v] / tau^2`.
pub fn expected_value_tau_derivative(values: &[f64], tau: Temperature) -> Result<f64> {
    let pi = boltzmann_policy(values, tau)?;
    let mean = pi.expectation(values);
    let var: f64 = pi.0.iter().zip(values).map(|(p, v)| p * (v - mean) * (v - mean)).sum();
    Ok(-var / (tau.0 * tau.0))
}

/// `E_{tau~omega}[E_{pi_tau}[v]]` for a finite-support temperature
/// distribution given as `(tau, weight)` pairs.
pub fn mixture_expected_value(values: &[f64], omega: &[(f64, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for &(tau, w) in omega {
        total += w * expected_value(values, Temperature::new(tau)?)?;
    }
    Ok(total)
}

/// Lipschitz constant `(max v - min v)^2 / k^2` of `tau -> E_{pi_tau}[v]` on
/// `[k, inf)`.
pub fn tau_lipschitz_constant(values: &[f64], k: f64) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) * (max - min) / (k * k)
}

/// `x = ln(1 + 1/tau)`, the coordinate the bandits search over.
pub fn tau_to_x(tau: Temperature) -> f64 {
    libm::log1p(1.0 / tau.0)
}

/// `tau = 1 / (exp(x) - 1)`.
pub fn x_to_tau(x: f64) -> Result<Temperature> {
    if x.is_nan() || x <= 0.0 || x.is_infinite() {
        return Err(invalid!("bandit coordinate must be finite and positive, got {x}"));
    }
    Temperature::new(1.0 / libm::expm1(x))
}
