//! Applying reversible aggregators to environments and to tabular processes.
//!
//! [`wrap`] turns an environment into one with the same interface whose
//! observations (and optionally rewards) are aggregated histories. The wrapper
//! never decodes while simulating: it steps the inner environment and feeds
//! the resulting observation through the aggregator.
//!
//! [`as_nmdp_oracle`] gives the exact transition law of the wrapped process
//! for a tabular base: it decodes the aggregated history, applies the base
//! table to the decoded current state, and re-aggregates each outcome.

use std::sync::Arc;

use crate::aggregators::{run, FunctorSpec, RewardStream, Stage, StreamTransform};
use crate::envs::{Environment, Step};
use crate::error::{Error, Result};
use crate::process::{Dist, FiniteMdp, History, NmdpOracle, StateVec};

/// One aggregation layer over an inner environment.
pub struct WrappedEnv {
    inner: Box<dyn Environment>,
    observations: Option<Box<dyn StreamTransform>>,
    rewards: Option<RewardStream>,
}

impl WrappedEnv {
    /// Aggregates observations with a single stage.
    pub fn observation_stage(inner: Box<dyn Environment>, stage: &Stage) -> Result<Self> {
        Ok(WrappedEnv {
            inner,
            observations: Some(stage.aggregator()?),
            rewards: None,
        })
    }

    /// Aggregates rewards with `spec`; observations pass through.
    pub fn reward_aggregator(inner: Box<dyn Environment>, spec: &FunctorSpec) -> Result<Self> {
        Ok(WrappedEnv {
            inner,
            observations: None,
            rewards: Some(RewardStream::aggregator(spec)?),
        })
    }
}

impl Environment for WrappedEnv {
    fn reset(&mut self, seed: u64) -> Result<StateVec> {
        let obs = self.inner.reset(seed)?;
        if let Some(r) = &mut self.rewards {
            r.reset();
        }
        match &mut self.observations {
            Some(agg) => agg.begin(&obs),
            None => Ok(obs),
        }
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        let mut step = self.inner.step(action)?;
        if let Some(agg) = &mut self.observations {
            step.observation = agg.push(&step.observation)?;
        }
        if let Some(r) = &mut self.rewards {
            step.reward = r.push(step.reward)?;
        }
        Ok(step)
    }

    fn observation_dim(&self) -> usize {
        self.inner.observation_dim()
    }

    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }
}

/// Nests one observation layer per primitive stage of `spec` (so `G^n` is
/// `n` nested applications), then an optional reward layer.
pub fn wrap(env: Box<dyn Environment>, spec: &FunctorSpec, har: Option<&FunctorSpec>) -> Result<Box<dyn Environment>> {
    let mut env = env;
    for stage in spec.stages() {
        env = Box::new(WrappedEnv::observation_stage(env, &stage)?);
    }
    if let Some(har) = har {
        env = Box::new(WrappedEnv::reward_aggregator(env, har)?);
    }
    Ok(env)
}

/// Exact transition law of a tabular process seen through an aggregator.
#[derive(Clone, Debug)]
pub struct HasOracle {
    mdp: Arc<FiniteMdp>,
    spec: FunctorSpec,
    degenerate: bool,
}

pub fn as_nmdp_oracle(mdp: Arc<FiniteMdp>, spec: FunctorSpec) -> Result<HasOracle> {
    // fail early on specs whose transforms cannot be built
    spec.aggregator()?;
    spec.decoder()?;
    let degenerate = mdp.is_degenerate();
    Ok(HasOracle { mdp, spec, degenerate })
}

impl HasOracle {
    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }

    pub fn spec(&self) -> &FunctorSpec {
        &self.spec
    }

    /// True when the base process has indistinguishable states.
    pub fn base_is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Raw decoded vectors `d_0..d_t`.
    pub fn decode(&self, history: &History) -> Result<Vec<StateVec>> {
        for s in history.states() {
            s.check_dim(self.mdp.dim())?;
        }
        run(self.spec.decoder()?.as_mut(), history.states())
    }

    /// Aggregates of an explicit base trajectory.
    pub fn aggregate(&self, trajectory: &[StateVec]) -> Result<Vec<StateVec>> {
        run(self.spec.aggregator()?.as_mut(), trajectory)
    }
}

impl NmdpOracle for HasOracle {
    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn initial(&self) -> Result<Vec<(StateVec, f64)>> {
        let mut out = Vec::new();
        for (s, &p) in self.mdp.rho0().iter().enumerate() {
            if p > 0.0 {
                out.push((self.spec.aggregator()?.begin(self.mdp.embed(s))?, p));
            }
        }
        Ok(out)
    }

    fn transition(&self, history: &History, action: usize) -> Result<Dist> {
        if action >= self.mdp.num_actions() {
            return Err(Error::InvalidAction {
                action,
                num_actions: self.mdp.num_actions(),
            });
        }
        let decoded = self.decode(history)?;
        let current = decoded.last().expect("nonempty history");
        let state = self
            .mdp
            .identify(current)
            .ok_or_else(|| Error::Undecodable(format!("decoded state {current:?} matches no embedded state")))?;
        let mut entries = Vec::new();
        for o in self.mdp.outcomes(state, action) {
            let mut agg = self.spec.aggregator()?;
            run(agg.as_mut(), &decoded)?;
            entries.push((agg.push(self.mdp.embed(o.next))?, o.reward, o.prob));
        }
        Ok(Dist::new(entries))
    }

    fn decode_current(&self, history: &History) -> Option<Result<StateVec>> {
        Some(self.decode(history).map(|mut d| d.pop().expect("nonempty history")))
    }
}
