//! Turning Markov decision processes into non-Markovian ones with reversible
//! history aggregators, and checking what that does to them.
//!
//! * [`process`]: states, histories, tabular processes.
//! * [`envs`]: the environment interface and built-in environments.
//! * [`aggregators`]: group, convolution and correlation aggregators for
//!   states and rewards, with their decoders.
//! * [`wrappers`]: aggregated environments and exact transition oracles.
//! * [`analysis`]: dependency structure, Markov abstraction, morphisms.
//! * [`agents`]: random and windowed tabular Q-learning agents.
//! * [`experiments`]: sweep runner and plotting.

// `!(x >= tol)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod aggregators;
pub mod analysis;
pub mod cli;
pub mod envs;
pub mod error;
pub mod experiments;
pub mod process;
pub mod wrappers;

pub use error::{Error, Result};
