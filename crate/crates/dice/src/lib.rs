//! Threaded actor-learner runtime, text formats and command line for
//! [`dice_core`].

#![forbid(unsafe_code)]

pub mod checkpoint;
pub mod cli;
pub mod config;
mod error;
pub mod mdp_file;
pub mod metrics;
pub mod runtime;

pub use crate::error::{Error, Result};
