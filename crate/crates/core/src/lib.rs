//! Tabular core of an off-policy actor–learner agent whose behavior policy
//! is a Boltzmann temperature family of the learned advantages.
//!
//! Everything here is a pure function of its inputs (plus a caller-owned
//! random number generator where sampling is involved), so the crate builds
//! without `std`. Threads, queues, files, and the command line live in the
//! `dice-rl` companion crate.
//!
//! Module map:
//!
//! * [`policy`]: softmax-with-temperature, entropy, advantage centering,
//!   and the `x <-> tau` transform used by the bandits.
//! * [`traces`]: V-Trace, ReTrace and DR-trace return targets computed from
//!   sampled trajectories, plus [`traces::exact`] operator forms evaluated in
//!   expectation on a tabular MDP.
//! * [`bandit`]: tile-coded bandits and the voting ensemble that picks a
//!   temperature per episode.
//! * [`mdp`]: tabular environments, the linear-solve policy evaluation
//!   oracle, clipped target policies, episode sampling, reward shaping.
//! * [`learner`]: agent parameters, run configuration, and the tabular
//!   learner step.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod bandit;
mod error;
pub mod learner;
pub mod linalg;
pub mod mdp;
pub mod policy;
pub mod stats;
pub mod table;
pub mod traces;

pub use crate::error::{Error, Result};
