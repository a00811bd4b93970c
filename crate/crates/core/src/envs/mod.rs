//! The environment interface and the built-in environments.
//!
//! Environments are addressed by string ids:
//! `chain:N[:slip]`, `random:seed:S:A:B`, `cartpole`, `pendulum`,
//! `mdp-file:PATH`.

mod classic;
mod tabular;

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

pub use classic::{make_cartpole, make_pendulum, CartPole, Pendulum};
pub use tabular::{make_chain, make_random_mdp, value_iteration, ChainSpec, TabularEnv, ValueTable};

use crate::error::{Error, Result};
use crate::process::{FiniteMdp, StateVec};

/// Result of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: StateVec,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// A seeded, fully deterministic episodic environment.
pub trait Environment: Send {
    fn reset(&mut self, seed: u64) -> Result<StateVec>;
    /// Errors when called before `reset` or after the episode ended.
    fn step(&mut self, action: usize) -> Result<Step>;
    fn observation_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn reset(&mut self, seed: u64) -> Result<StateVec> {
        (**self).reset(seed)
    }
    fn step(&mut self, action: usize) -> Result<Step> {
        (**self).step(action)
    }
    fn observation_dim(&self) -> usize {
        (**self).observation_dim()
    }
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnvId {
    Chain(ChainSpec),
    Random {
        seed: u64,
        states: usize,
        actions: usize,
        branching: usize,
    },
    CartPole,
    Pendulum,
    MdpFile(PathBuf),
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::spec(s, msg);
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["cartpole"] => Ok(EnvId::CartPole),
            ["pendulum"] => Ok(EnvId::Pendulum),
            ["mdp-file", ..] => {
                let path = s.strip_prefix("mdp-file:").unwrap_or_default();
                if path.is_empty() {
                    return Err(bad("missing path"));
                }
                Ok(EnvId::MdpFile(PathBuf::from(path)))
            }
            ["chain", n, rest @ ..] if rest.len() <= 1 => {
                let length = n.parse().map_err(|_| bad("chain length must be an integer"))?;
                let slip = match rest {
                    [p] => p.parse().map_err(|_| bad("slip must be a number"))?,
                    _ => 0.0,
                };
                Ok(EnvId::Chain(ChainSpec { length, slip }))
            }
            ["random", seed, st, ac, br] => {
                let num = |x: &str| x.parse::<usize>().map_err(|_| bad("expected an integer"));
                Ok(EnvId::Random {
                    seed: seed.parse().map_err(|_| bad("seed must be an integer"))?,
                    states: num(st)?,
                    actions: num(ac)?,
                    branching: num(br)?,
                })
            }
            _ => Err(bad("unknown environment id")),
        }
    }
}

impl std::fmt::Display for EnvId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvId::Chain(c) if c.slip == 0.0 => write!(f, "chain:{}", c.length),
            EnvId::Chain(c) => write!(f, "chain:{}:{}", c.length, c.slip),
            EnvId::Random {
                seed,
                states,
                actions,
                branching,
            } => {
                write!(f, "random:{seed}:{states}:{actions}:{branching}")
            }
            EnvId::CartPole => write!(f, "cartpole"),
            EnvId::Pendulum => write!(f, "pendulum"),
            EnvId::MdpFile(p) => write!(f, "mdp-file:{}", p.display()),
        }
    }
}

impl EnvId {
    /// The tabular process behind the id, if it has one.
    pub fn finite_mdp(&self) -> Result<Option<FiniteMdp>> {
        Ok(match self {
            EnvId::Chain(spec) => Some(make_chain(spec)?),
            EnvId::Random {
                seed,
                states,
                actions,
                branching,
            } => Some(make_random_mdp(*seed, *states, *actions, *branching)?),
            EnvId::MdpFile(path) => Some(FiniteMdp::load(path)?),
            EnvId::CartPole | EnvId::Pendulum => None,
        })
    }

    /// Episode length cap: `2(N-1)` for chains, 10 for other tabular
    /// processes, and the standard caps for the classic-control tasks.
    pub fn default_horizon(&self) -> usize {
        match self {
            EnvId::Chain(spec) => (2 * spec.length.saturating_sub(1)).max(1),
            EnvId::Random { .. } | EnvId::MdpFile(_) => 10,
            EnvId::CartPole => classic::CARTPOLE_MAX_STEPS,
            EnvId::Pendulum => classic::PENDULUM_MAX_STEPS,
        }
    }

    pub fn is_tabular(&self) -> bool {
        !matches!(self, EnvId::CartPole | EnvId::Pendulum)
    }

    /// Builds the environment; `horizon` overrides the step cap of tabular
    /// environments.
    pub fn build(&self, horizon: Option<usize>) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvId::CartPole => Box::new(make_cartpole()),
            EnvId::Pendulum => Box::new(make_pendulum()),
            _ => {
                let mdp = self.finite_mdp()?.expect("tabular id");
                Box::new(TabularEnv::new(
                    Arc::new(mdp),
                    horizon.unwrap_or(self.default_horizon()),
                )?)
            }
        })
    }
}

pub fn make_env(id: &str, horizon: Option<usize>) -> Result<Box<dyn Environment>> {
    id.parse::<EnvId>()?.build(horizon)
}
