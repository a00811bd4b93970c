//! Named wrapper functors and their string grammar.
//!
//! ```text
//! spec    := part ("+" part)*
//! part    := "id" | "S^n" | "D^n" | "G^n" | "S_l:λ" | "D_l:λ"
//!          | "conv:w0,w1,..." | "geo:first,ratio" | "corr:w0,w1,..." | "sum"
//! ```
//!
//! `S` is the running sum, `D` the first difference (with `s_{-1} = 0`),
//! `S_l` the exponentially weighted sum and `D_l` the damped difference.
//! `G^n` is `n` nested applications of the group prefix-combine. Parts
//! apply left to right.

use std::fmt;
use std::str::FromStr;

use super::kernel::{convolve, Kernel};
use super::stream::{
    kernel_aggregator, kernel_decoder, Chain, Correlation, CorrelationDecoder, GroupDecoder, Identity, RunningSum,
    StreamTransform,
};
use crate::error::{Error, Result};

const MAX_POWER: u32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum Functor {
    Identity,
    SPower(u32),
    DPower(u32),
    SLambda(f64),
    DLambda(f64),
    GroupPower(u32),
    Conv(Kernel),
    Corr(Vec<f64>),
}

/// One primitive aggregation stage.
#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    GroupSum,
    Kernel(Kernel),
    Corr(Vec<f64>),
}

impl Stage {
    pub fn aggregator(&self) -> Result<Box<dyn StreamTransform>> {
        Ok(match self {
            Stage::GroupSum => Box::new(RunningSum::default()),
            Stage::Kernel(k) => kernel_aggregator(k),
            Stage::Corr(w) => Box::new(Correlation::new(w.clone())?),
        })
    }

    pub fn decoder(&self) -> Result<Box<dyn StreamTransform>> {
        match self {
            Stage::GroupSum => Ok(Box::new(GroupDecoder::default())),
            Stage::Kernel(k) => kernel_decoder(k),
            Stage::Corr(w) => Ok(Box::new(CorrelationDecoder::new(w.clone())?)),
        }
    }
}

impl Functor {
    pub fn stages(&self) -> Vec<Stage> {
        let repeat = |n: u32, s: Stage| vec![s; n as usize];
        match self {
            Functor::Identity => Vec::new(),
            Functor::SPower(n) => repeat(*n, Stage::Kernel(Kernel::ones())),
            Functor::DPower(n) => repeat(*n, Stage::Kernel(Kernel::Band(vec![1.0, -1.0]))),
            Functor::SLambda(l) => vec![Stage::Kernel(Kernel::Geometric { first: 1.0, ratio: *l })],
            Functor::DLambda(l) => vec![Stage::Kernel(Kernel::Band(vec![1.0, -l]))],
            Functor::GroupPower(n) => repeat(*n, Stage::GroupSum),
            Functor::Conv(k) => vec![Stage::Kernel(k.clone())],
            Functor::Corr(w) => vec![Stage::Corr(w.clone())],
        }
    }

    /// Wrapper family name and grid parameter used in sweep output.
    pub fn family(&self) -> (String, f64) {
        match self {
            Functor::Identity => ("id".into(), 0.0),
            Functor::SPower(n) => ("S".into(), *n as f64),
            Functor::DPower(n) => ("D".into(), *n as f64),
            Functor::GroupPower(n) => ("G".into(), *n as f64),
            Functor::SLambda(l) => ("S_l".into(), *l),
            Functor::DLambda(l) => ("D_l".into(), *l),
            other => (other.to_string(), 0.0),
        }
    }
}

fn fmt_list(f: &mut fmt::Formatter<'_>, xs: &[f64]) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

impl fmt::Display for Functor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functor::Identity => write!(f, "id"),
            Functor::SPower(n) => write!(f, "S^{n}"),
            Functor::DPower(n) => write!(f, "D^{n}"),
            Functor::GroupPower(n) => write!(f, "G^{n}"),
            Functor::SLambda(l) => write!(f, "S_l:{l}"),
            Functor::DLambda(l) => write!(f, "D_l:{l}"),
            Functor::Conv(Kernel::Band(w)) => {
                write!(f, "conv:")?;
                fmt_list(f, w)
            }
            Functor::Conv(Kernel::Geometric { first, ratio }) => write!(f, "geo:{first},{ratio}"),
            Functor::Corr(w) => {
                write!(f, "corr:")?;
                fmt_list(f, w)
            }
        }
    }
}

/// A left-to-right composition of functors.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctorSpec {
    parts: Vec<Functor>,
}

impl FunctorSpec {
    pub fn new(parts: Vec<Functor>) -> Self {
        FunctorSpec { parts }
    }

    pub fn identity() -> Self {
        FunctorSpec::new(vec![Functor::Identity])
    }

    pub fn single(f: Functor) -> Self {
        FunctorSpec::new(vec![f])
    }

    pub fn parts(&self) -> &[Functor] {
        &self.parts
    }

    /// All primitive stages in application order.
    pub fn stages(&self) -> Vec<Stage> {
        self.parts.iter().flat_map(Functor::stages).collect()
    }

    pub fn aggregator(&self) -> Result<Box<dyn StreamTransform>> {
        chain(self.stages().iter().map(Stage::aggregator).collect::<Result<_>>()?)
    }

    /// Decoder for the whole composition: stage decoders in reverse order.
    pub fn decoder(&self) -> Result<Box<dyn StreamTransform>> {
        chain(self.stages().iter().rev().map(Stage::decoder).collect::<Result<_>>()?)
    }

    /// Convolution kernel of the whole composition, expanded to `len`
    /// coefficients; `None` when a correlation stage is present.
    pub fn effective_kernel(&self, len: usize) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; len];
        if len > 0 {
            acc[0] = 1.0;
        }
        for stage in self.stages() {
            let coeffs = match stage {
                Stage::GroupSum => Kernel::ones().coefficients(len),
                Stage::Kernel(k) => k.coefficients(len),
                Stage::Corr(_) => return None,
            };
            acc = convolve(&acc, &coeffs, len);
        }
        Some(acc)
    }

    /// If the composition is exactly `G^n` (possibly split across parts,
    /// identities ignored), returns `n`.
    pub fn group_power(&self) -> Option<u32> {
        let mut n = 0;
        for p in &self.parts {
            match p {
                Functor::Identity => {}
                Functor::GroupPower(k) => n += k,
                _ => return None,
            }
        }
        Some(n)
    }

    /// Single-part family/parameter, or the full spec string for chains.
    pub fn family(&self) -> (String, f64) {
        match self.parts.as_slice() {
            [single] => single.family(),
            _ => (self.to_string(), 0.0),
        }
    }
}

fn chain(mut stages: Vec<Box<dyn StreamTransform>>) -> Result<Box<dyn StreamTransform>> {
    Ok(match stages.len() {
        0 => Box::new(Identity::default()),
        1 => stages.pop().expect("one stage"),
        _ => Box::new(Chain::new(stages)),
    })
}

impl fmt::Display for FunctorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

fn parse_power(full: &str, digits: &str) -> Result<u32> {
    let n: u32 = digits
        .parse()
        .map_err(|_| Error::spec(full, format!("`{digits}` is not a non-negative integer power")))?;
    if n > MAX_POWER {
        return Err(Error::spec(full, format!("power {n} exceeds {MAX_POWER}")));
    }
    Ok(n)
}

fn parse_lambda(full: &str, text: &str) -> Result<f64> {
    let l: f64 = text
        .parse()
        .map_err(|_| Error::spec(full, format!("`{text}` is not a number")))?;
    if !(0.0..=1.0).contains(&l) {
        return Err(Error::spec(full, format!("lambda {l} is outside [0, 1]")));
    }
    Ok(l)
}

fn parse_list(full: &str, text: &str) -> Result<Vec<f64>> {
    let xs = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::spec(full, format!("`{t}` is not a finite number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if xs.is_empty() {
        return Err(Error::spec(full, "empty coefficient list"));
    }
    Ok(xs)
}

impl FromStr for Functor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let wrap = |e: Error| match e {
            Error::Spec { .. } => e,
            other => Error::spec(s, other.to_string()),
        };
        if s == "id" {
            return Ok(Functor::Identity);
        }
        if s == "sum" {
            return Ok(Functor::SPower(1));
        }
        if let Some(n) = s.strip_prefix("S^") {
            return Ok(Functor::SPower(parse_power(s, n)?));
        }
        if let Some(n) = s.strip_prefix("D^") {
            return Ok(Functor::DPower(parse_power(s, n)?));
        }
        if let Some(n) = s.strip_prefix("G^") {
            return Ok(Functor::GroupPower(parse_power(s, n)?));
        }
        if let Some(l) = s.strip_prefix("S_l:") {
            return Ok(Functor::SLambda(parse_lambda(s, l)?));
        }
        if let Some(l) = s.strip_prefix("D_l:") {
            return Ok(Functor::DLambda(parse_lambda(s, l)?));
        }
        if let Some(w) = s.strip_prefix("conv:") {
            return Ok(Functor::Conv(Kernel::band(parse_list(s, w)?).map_err(wrap)?));
        }
        if let Some(w) = s.strip_prefix("geo:") {
            let xs = parse_list(s, w)?;
            let [first, ratio] = xs[..] else {
                return Err(Error::spec(s, "geo takes exactly `first,ratio`"));
            };
            return Ok(Functor::Conv(Kernel::geometric(first, ratio).map_err(wrap)?));
        }
        if let Some(w) = s.strip_prefix("corr:") {
            let xs = parse_list(s, w)?;
            Correlation::new(xs.clone()).map_err(wrap)?;
            return Ok(Functor::Corr(xs));
        }
        Err(Error::spec(s, "unknown functor"))
    }
}

impl FromStr for FunctorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Err(Error::spec(s, "empty spec"));
        }
        Ok(FunctorSpec::new(s.split('+').map(str::parse).collect::<Result<_>>()?))
    }
}
