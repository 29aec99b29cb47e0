//! Dense state-by-action tables.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::policy::PolicyDistribution;
use crate::Result;

/// Row-major `n_states x n_actions` table of reals (Q, A, rewards).
#[derive(Debug, Clone, PartialEq)]
pub struct StateActionTable {
    n_states: usize,
    n_actions: usize,
    data: Vec<f64>,
}

impl StateActionTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, data: vec![0.0; n_states * n_actions] }
    }

    pub fn from_vec(n_states: usize, n_actions: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_states * n_actions {
            return Err(invalid!(
                "table data has {} entries, expected {}x{}",
                data.len(),
                n_states,
                n_actions
            ));
        }
        Ok(Self { n_states, n_actions, data })
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                data.push(f(s, a));
            }
        }
        Self { n_states, n_actions, data }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.data[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.data[s * self.n_actions + a] = value;
    }

    #[inline]
    pub fn add(&mut self, s: usize, a: usize, delta: f64) {
        self.data[s * self.n_actions + a] += delta;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        crate::linalg::sup_distance(&self.data, &other.data)
    }

    /// `E_{a~pi(s)}[table(s, a)]` for every state.
    pub fn expectation_under(&self, pi: &PolicyTable) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| self.row(s).iter().zip(pi.row(s)).map(|(q, p)| q * p).sum())
            .collect()
    }
}

/// One action distribution per state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    /// Builds a table from row-major probabilities, validating every row.
    pub fn from_vec(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(invalid!(
                "policy table has {} entries, expected {}x{}",
                probs.len(),
                n_states,
                n_actions
            ));
        }
        for s in 0..n_states {
            PolicyDistribution::validate(&probs[s * n_actions..(s + 1) * n_actions])?;
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn from_rows(rows: &[PolicyDistribution]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, |r| r.len());
        let mut probs = Vec::with_capacity(rows.len() * n_actions);
        for row in rows {
            if row.len() != n_actions {
                return Err(invalid!("policy rows have different lengths"));
            }
            probs.extend_from_slice(row.probs());
        }
        Self::from_vec(rows.len(), n_actions, probs)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self { n_states, n_actions, probs: vec![p; n_states * n_actions] }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn distribution(&self, s: usize) -> PolicyDistribution {
        PolicyDistribution::new_unchecked(self.row(s).to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}
