//! History aggregators for rewards: the same stream transforms run over the
//! scalar reward sequence `r_0, r_1, ...`.

use super::functor::FunctorSpec;
use super::stream::{run, StreamTransform};
use crate::error::Result;
use crate::process::StateVec;

/// Incremental reward aggregator (or decoder) over scalars.
pub struct RewardStream {
    inner: Box<dyn StreamTransform>,
    started: bool,
}

impl RewardStream {
    pub fn aggregator(spec: &FunctorSpec) -> Result<Self> {
        Ok(RewardStream {
            inner: spec.aggregator()?,
            started: false,
        })
    }

    pub fn decoder(spec: &FunctorSpec) -> Result<Self> {
        Ok(RewardStream {
            inner: spec.decoder()?,
            started: false,
        })
    }

    pub fn reset(&mut self) {
        self.started = false;
    }

    pub fn push(&mut self, reward: f64) -> Result<f64> {
        let x = StateVec::scalar(reward);
        let out = if self.started {
            self.inner.push(&x)?
        } else {
            self.started = true;
            self.inner.begin(&x)?
        };
        Ok(out.as_slice()[0])
    }
}

fn apply(transform: &mut dyn StreamTransform, xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let vs: Vec<StateVec> = xs.iter().map(|&x| StateVec::new(vec![x])).collect::<Result<_>>()?;
    Ok(run(transform, &vs)?.into_iter().map(|v| v.as_slice()[0]).collect())
}

pub fn har_aggregate(spec: &FunctorSpec, rewards: &[f64]) -> Result<Vec<f64>> {
    apply(spec.aggregator()?.as_mut(), rewards)
}

pub fn har_decode(spec: &FunctorSpec, aggregates: &[f64]) -> Result<Vec<f64>> {
    apply(spec.decoder()?.as_mut(), aggregates)
}
