//! Incremental aggregators and their paired decoders.
//!
//! Every transform consumes one vector per step and emits one vector per
//! step. Aggregators map states to aggregates; decoders map aggregates back.
//! Missing terms before the start of the stream are taken as zero.

use std::collections::VecDeque;

use super::kernel::{Kernel, HEAD_TOL};
use crate::error::{Error, Result};
use crate::process::StateVec;

/// A stateful per-step vector transform.
pub trait StreamTransform: Send {
    /// Starts a new stream; discards any previous state.
    fn begin(&mut self, first: &StateVec) -> Result<StateVec>;
    fn push(&mut self, next: &StateVec) -> Result<StateVec>;
}

/// Runs a transform over a whole trajectory.
pub fn run(transform: &mut dyn StreamTransform, xs: &[StateVec]) -> Result<Vec<StateVec>> {
    let (first, rest) = xs.split_first().ok_or(Error::EmptyComponent("trajectory"))?;
    let mut out = Vec::with_capacity(xs.len());
    out.push(transform.begin(first)?);
    for x in rest {
        out.push(transform.push(x)?);
    }
    Ok(out)
}

fn started(dim: Option<usize>, x: &StateVec) -> Result<usize> {
    let dim = dim.ok_or_else(|| Error::Validation("push before begin".into()))?;
    x.check_dim(dim)?;
    Ok(dim)
}

#[derive(Clone, Debug, Default)]
pub struct Identity {
    dim: Option<usize>,
}

impl StreamTransform for Identity {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        self.dim = Some(first.dim());
        Ok(first.clone())
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        started(self.dim, next)?;
        Ok(next.clone())
    }
}

/// Prefix combine under `(ℝᵏ, +)`: `g_t = Σ_{τ≤t} s_τ`.
#[derive(Clone, Debug, Default)]
pub struct RunningSum {
    acc: Option<Vec<f64>>,
}

impl StreamTransform for RunningSum {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        self.acc = Some(first.as_slice().to_vec());
        Ok(first.clone())
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        let acc = self
            .acc
            .as_mut()
            .ok_or_else(|| Error::Validation("push before begin".into()))?;
        next.check_dim(acc.len())?;
        for (a, x) in acc.iter_mut().zip(next.as_slice()) {
            *a += x;
        }
        Ok(StateVec::from_raw(acc.clone()))
    }
}

/// Group inverse of [`RunningSum`]: `s_t = g_t - g_{t-1}`.
#[derive(Clone, Debug, Default)]
pub struct GroupDecoder {
    prev: Option<Vec<f64>>,
}

impl StreamTransform for GroupDecoder {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        self.prev = Some(first.as_slice().to_vec());
        Ok(first.clone())
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        let prev = self
            .prev
            .as_mut()
            .ok_or_else(|| Error::Validation("push before begin".into()))?;
        next.check_dim(prev.len())?;
        let out = next.as_slice().iter().zip(prev.iter()).map(|(g, p)| g - p).collect();
        prev.copy_from_slice(next.as_slice());
        Ok(StateVec::from_raw(out))
    }
}

/// Convolution with a band kernel; keeps the last `b-1` inputs.
#[derive(Clone, Debug)]
pub struct BandConv {
    w: Vec<f64>,
    dim: Option<usize>,
    // most recent first
    recent: VecDeque<Vec<f64>>,
}

impl BandConv {
    pub fn new(w: Vec<f64>) -> Self {
        BandConv {
            w,
            dim: None,
            recent: VecDeque::new(),
        }
    }

    fn step(&mut self, x: &StateVec) -> StateVec {
        let mut out: Vec<f64> = x.as_slice().iter().map(|v| self.w[0] * v).collect();
        for (w, past) in self.w[1..].iter().zip(&self.recent) {
            for (o, p) in out.iter_mut().zip(past) {
                *o += w * p;
            }
        }
        if self.w.len() > 1 {
            if self.recent.len() == self.w.len() - 1 {
                self.recent.pop_back();
            }
            self.recent.push_front(x.as_slice().to_vec());
        }
        StateVec::from_raw(out)
    }
}

impl StreamTransform for BandConv {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        self.dim = Some(first.dim());
        self.recent.clear();
        Ok(self.step(first))
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        started(self.dim, next)?;
        Ok(self.step(next))
    }
}

/// Forward substitution for a band kernel:
/// `s_t = w_0⁻¹ (r_t - Σ_{τ≥1} w_τ s_{t-τ})` over previously decoded states.
#[derive(Clone, Debug)]
pub struct BandDeconv {
    w: Vec<f64>,
    dim: Option<usize>,
    decoded: VecDeque<Vec<f64>>,
}

impl BandDeconv {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        let w0 = *w.first().ok_or(Error::EmptyComponent("kernel coefficients"))?;
        if !(w0.abs() >= HEAD_TOL) {
            return Err(Error::NonInvertibleHead(w0));
        }
        Ok(BandDeconv {
            w,
            dim: None,
            decoded: VecDeque::new(),
        })
    }

    fn step(&mut self, r: &StateVec) -> StateVec {
        let mut acc = r.as_slice().to_vec();
        for (w, past) in self.w[1..].iter().zip(&self.decoded) {
            for (a, p) in acc.iter_mut().zip(past) {
                *a -= w * p;
            }
        }
        let out: Vec<f64> = acc.into_iter().map(|a| a / self.w[0]).collect();
        if self.w.len() > 1 {
            if self.decoded.len() == self.w.len() - 1 {
                self.decoded.pop_back();
            }
            self.decoded.push_front(out.clone());
        }
        StateVec::from_raw(out)
    }
}

impl StreamTransform for BandDeconv {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        self.dim = Some(first.dim());
        self.decoded.clear();
        Ok(self.step(first))
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        started(self.dim, next)?;
        Ok(self.step(next))
    }
}

/// Convolution with `w_τ = first · ratio^τ`, kept in closed form:
/// `r_t = first · s_t + ratio · r_{t-1}`.
#[derive(Clone, Debug)]
pub struct GeometricConv {
    first: f64,
    ratio: f64,
    prev: Option<Vec<f64>>,
}

impl GeometricConv {
    pub fn new(first: f64, ratio: f64) -> Self {
        GeometricConv {
            first,
            ratio,
            prev: None,
        }
    }
}

impl StreamTransform for GeometricConv {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        let out: Vec<f64> = first.as_slice().iter().map(|s| self.first * s).collect();
        self.prev = Some(out.clone());
        Ok(StateVec::from_raw(out))
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        let prev = self
            .prev
            .as_mut()
            .ok_or_else(|| Error::Validation("push before begin".into()))?;
        next.check_dim(prev.len())?;
        for (p, s) in prev.iter_mut().zip(next.as_slice()) {
            *p = self.first * s + self.ratio * *p;
        }
        Ok(StateVec::from_raw(prev.clone()))
    }
}

/// Inverse of [`GeometricConv`]: `s_t = (r_t - ratio · r_{t-1}) / first`.
#[derive(Clone, Debug)]
pub struct GeometricDeconv {
    first: f64,
    ratio: f64,
    prev: Option<Vec<f64>>,
}

impl GeometricDeconv {
    pub fn new(first: f64, ratio: f64) -> Result<Self> {
        if !(first.abs() >= HEAD_TOL) {
            return Err(Error::NonInvertibleHead(first));
        }
        Ok(GeometricDeconv {
            first,
            ratio,
            prev: None,
        })
    }
}

impl StreamTransform for GeometricDeconv {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        self.prev = Some(first.as_slice().to_vec());
        Ok(StateVec::from_raw(
            first.as_slice().iter().map(|r| r / self.first).collect(),
        ))
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        let prev = self
            .prev
            .as_mut()
            .ok_or_else(|| Error::Validation("push before begin".into()))?;
        next.check_dim(prev.len())?;
        let out = next
            .as_slice()
            .iter()
            .zip(prev.iter())
            .map(|(r, p)| (r - self.ratio * p) / self.first)
            .collect();
        prev.copy_from_slice(next.as_slice());
        Ok(StateVec::from_raw(out))
    }
}

fn weight(weights: &[f64], t: usize) -> Result<f64> {
    let w = *weights.get(t).ok_or(Error::WeightsExhausted(t))?;
    Ok(w)
}

fn invertible_weight(weights: &[f64], t: usize) -> Result<f64> {
    let w = weight(weights, t)?;
    if !(w.abs() >= HEAD_TOL) {
        return Err(Error::NonInvertibleWeight { index: t, value: w });
    }
    Ok(w)
}

/// Correlation: `R_t = Σ_{τ≤t} w_τ · s_τ`, weights tied to absolute time.
#[derive(Clone, Debug)]
pub struct Correlation {
    weights: Vec<f64>,
    t: usize,
    acc: Option<Vec<f64>>,
}

impl Correlation {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        for (i, _) in weights.iter().enumerate() {
            invertible_weight(&weights, i)?;
        }
        Ok(Correlation {
            weights,
            t: 0,
            acc: None,
        })
    }
}

impl StreamTransform for Correlation {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        let w = weight(&self.weights, 0)?;
        let out: Vec<f64> = first.as_slice().iter().map(|s| w * s).collect();
        self.t = 0;
        self.acc = Some(out.clone());
        Ok(StateVec::from_raw(out))
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        let acc = self
            .acc
            .as_mut()
            .ok_or_else(|| Error::Validation("push before begin".into()))?;
        next.check_dim(acc.len())?;
        let w = weight(&self.weights, self.t + 1)?;
        self.t += 1;
        for (a, s) in acc.iter_mut().zip(next.as_slice()) {
            *a += w * s;
        }
        Ok(StateVec::from_raw(acc.clone()))
    }
}

/// `s_0 = w_0⁻¹ R_0`, `s_t = w_t⁻¹ (R_t - R_{t-1})`.
#[derive(Clone, Debug)]
pub struct CorrelationDecoder {
    weights: Vec<f64>,
    t: usize,
    prev: Option<Vec<f64>>,
}

impl CorrelationDecoder {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        for (i, _) in weights.iter().enumerate() {
            invertible_weight(&weights, i)?;
        }
        Ok(CorrelationDecoder {
            weights,
            t: 0,
            prev: None,
        })
    }
}

impl StreamTransform for CorrelationDecoder {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        let w = invertible_weight(&self.weights, 0)?;
        self.t = 0;
        self.prev = Some(first.as_slice().to_vec());
        Ok(StateVec::from_raw(first.as_slice().iter().map(|r| r / w).collect()))
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        let prev = self
            .prev
            .as_mut()
            .ok_or_else(|| Error::Validation("push before begin".into()))?;
        next.check_dim(prev.len())?;
        let w = invertible_weight(&self.weights, self.t + 1)?;
        self.t += 1;
        let out = next
            .as_slice()
            .iter()
            .zip(prev.iter())
            .map(|(r, p)| (r - p) / w)
            .collect();
        prev.copy_from_slice(next.as_slice());
        Ok(StateVec::from_raw(out))
    }
}

/// Applies transforms left to right.
pub struct Chain {
    stages: Vec<Box<dyn StreamTransform>>,
}

impl Chain {
    pub fn new(stages: Vec<Box<dyn StreamTransform>>) -> Self {
        Chain { stages }
    }
}

impl StreamTransform for Chain {
    fn begin(&mut self, first: &StateVec) -> Result<StateVec> {
        let mut x = first.clone();
        for stage in &mut self.stages {
            x = stage.begin(&x)?;
        }
        Ok(x)
    }

    fn push(&mut self, next: &StateVec) -> Result<StateVec> {
        let mut x = next.clone();
        for stage in &mut self.stages {
            x = stage.push(&x)?;
        }
        Ok(x)
    }
}

pub fn kernel_aggregator(kernel: &Kernel) -> Box<dyn StreamTransform> {
    match kernel {
        Kernel::Band(w) => Box::new(BandConv::new(w.clone())),
        Kernel::Geometric { first, ratio } => Box::new(GeometricConv::new(*first, *ratio)),
    }
}

pub fn kernel_decoder(kernel: &Kernel) -> Result<Box<dyn StreamTransform>> {
    Ok(match kernel {
        Kernel::Band(w) => Box::new(BandDeconv::new(w.clone())?),
        Kernel::Geometric { first, ratio } => Box::new(GeometricDeconv::new(*first, *ratio)?),
    })
}

fn check_dims(xs: &[StateVec]) -> Result<()> {
    if let Some(first) = xs.first() {
        for x in xs {
            x.check_dim(first.dim())?;
        }
    }
    Ok(())
}

pub fn group_aggregate(trajectory: &[StateVec]) -> Result<Vec<StateVec>> {
    check_dims(trajectory)?;
    run(&mut RunningSum::default(), trajectory)
}

pub fn group_decode(aggregates: &[StateVec]) -> Result<Vec<StateVec>> {
    check_dims(aggregates)?;
    run(&mut GroupDecoder::default(), aggregates)
}

pub fn conv_aggregate(kernel: &Kernel, trajectory: &[StateVec]) -> Result<Vec<StateVec>> {
    check_dims(trajectory)?;
    run(kernel_aggregator(kernel).as_mut(), trajectory)
}

pub fn conv_decode(kernel: &Kernel, aggregates: &[StateVec]) -> Result<Vec<StateVec>> {
    check_dims(aggregates)?;
    run(kernel_decoder(kernel)?.as_mut(), aggregates)
}

pub fn corr_aggregate(weights: &[f64], trajectory: &[StateVec]) -> Result<Vec<StateVec>> {
    check_dims(trajectory)?;
    run(&mut Correlation::new(weights.to_vec())?, trajectory)
}

pub fn corr_decode(weights: &[f64], aggregates: &[StateVec]) -> Result<Vec<StateVec>> {
    check_dims(aggregates)?;
    run(&mut CorrelationDecoder::new(weights.to_vec())?, aggregates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(xs: &[f64]) -> Vec<StateVec> {
        xs.iter().map(|&x| StateVec::scalar(x)).collect()
    }

    fn values(xs: &[StateVec]) -> Vec<f64> {
        xs.iter().map(|x| x.as_slice()[0]).collect()
    }

    #[test]
    fn group_round_trip() {
        let g = group_aggregate(&scalars(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(values(&g), vec![1.0, 3.0, 6.0]);
        assert_eq!(values(&group_decode(&g).unwrap()), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn group_edge_cases() {
        let zeros = vec![StateVec::zeros(3); 4];
        assert_eq!(group_aggregate(&zeros).unwrap(), zeros);
        let single = vec![StateVec::new(vec![1.5, -2.0]).unwrap()];
        assert_eq!(group_aggregate(&single).unwrap(), single);
        assert_eq!(group_decode(&single).unwrap(), single);
        assert_eq!(values(&group_decode(&scalars(&[4.0, 4.0])).unwrap()), vec![4.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let bad = vec![StateVec::zeros(2), StateVec::zeros(3)];
        assert!(matches!(group_aggregate(&bad), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(group_decode(&bad), Err(Error::DimensionMismatch { .. })));
        let mut agg = RunningSum::default();
        agg.begin(&StateVec::zeros(2)).unwrap();
        assert!(agg.push(&StateVec::zeros(1)).is_err());
    }

    #[test]
    fn push_before_begin() {
        assert!(RunningSum::default().push(&StateVec::zeros(1)).is_err());
        assert!(BandConv::new(vec![1.0]).push(&StateVec::zeros(1)).is_err());
    }

    #[test]
    fn difference_kernel() {
        let k = Kernel::band(vec![1.0, -1.0]).unwrap();
        let r = conv_aggregate(&k, &scalars(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(values(&r), vec![1.0, 1.0, 1.0]);
        assert_eq!(values(&conv_decode(&k, &r).unwrap()), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn geometric_kernel() {
        let k = Kernel::geometric(1.0, 0.5).unwrap();
        let r = conv_aggregate(&k, &scalars(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(values(&r), vec![1.0, 2.5, 4.25]);
        assert_eq!(
            values(&conv_decode(&k, &scalars(&[1.0, 2.5, 4.25])).unwrap()),
            vec![1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn identity_kernel() {
        let xs = scalars(&[0.3, -7.0, 2.0]);
        assert_eq!(conv_aggregate(&Kernel::identity(), &xs).unwrap(), xs);
        assert_eq!(conv_decode(&Kernel::identity(), &xs).unwrap(), xs);
    }

    #[test]
    fn decoder_rejects_small_head() {
        assert!(matches!(
            BandDeconv::new(vec![1e-12, 1.0]),
            Err(Error::NonInvertibleHead(_))
        ));
        assert!(matches!(
            GeometricDeconv::new(0.0, 0.5),
            Err(Error::NonInvertibleHead(_))
        ));
    }

    #[test]
    fn correlation() {
        let r = corr_aggregate(&[1.0, 2.0, 3.0], &scalars(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(values(&r), vec![1.0, 5.0, 14.0]);
        assert_eq!(values(&corr_decode(&[1.0, 2.0, 3.0], &r).unwrap()), vec![1.0, 2.0, 3.0]);
        let single = scalars(&[2.5]);
        assert_eq!(corr_aggregate(&[1.0], &single).unwrap(), single);
    }

    #[test]
    fn correlation_with_unit_weights_is_group() {
        let xs = scalars(&[0.1, -0.7, 0.25, 3.0]);
        assert_eq!(corr_aggregate(&[1.0; 4], &xs).unwrap(), group_aggregate(&xs).unwrap());
    }

    #[test]
    fn correlation_errors() {
        assert!(matches!(
            corr_aggregate(&[1.0, 0.0], &scalars(&[1.0, 2.0])),
            Err(Error::NonInvertibleWeight { index: 1, .. })
        ));
        assert!(matches!(
            corr_aggregate(&[1.0], &scalars(&[1.0, 2.0])),
            Err(Error::WeightsExhausted(1))
        ));
    }
}
