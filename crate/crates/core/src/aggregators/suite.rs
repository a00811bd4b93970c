//! Randomized decode-after-aggregate check over the named functors and a
//! family of random band kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::functor::{Functor, FunctorSpec};
use super::kernel::{invert_coefficients, Kernel};
use super::stream::run;
use crate::error::Result;
use crate::process::StateVec;

/// End-to-end round-trip tolerance.
pub const ROUNDTRIP_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub trajectories: usize,
    pub max_dim: usize,
    pub max_len: usize,
    pub random_kernels: usize,
    /// Longest random band kernel.
    pub max_band: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            trajectories: 1000,
            max_dim: 6,
            max_len: 64,
            random_kernels: 50,
            max_band: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctorOutcome {
    pub spec: String,
    pub max_error: f64,
    /// `max |(w⁻¹)_{0,τ}|` over the trajectory length, for kernel specs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inverse_growth: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub pass: bool,
    pub tolerance: f64,
    pub trajectories: usize,
    pub outcomes: Vec<FunctorOutcome>,
}

impl SuiteReport {
    pub fn failures(&self) -> impl Iterator<Item = &FunctorOutcome> {
        self.outcomes.iter().filter(|o| !o.pass)
    }
}

/// Band kernel with `1 ≤ b ≤ max_band`, `|w_0| ∈ [0.5, 2]` and
/// `w_i ∈ [-2, 2]`.
pub fn random_band_kernel(rng: &mut impl Rng, max_band: usize) -> Kernel {
    let b = rng.gen_range(1..=max_band.max(1));
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let mut w = vec![sign * rng.gen_range(0.5..=2.0)];
    w.extend((1..b).map(|_| rng.gen_range(-2.0..=2.0)));
    Kernel::band(w).expect("head bounded away from zero")
}

/// `S^1`, `D^1`, `S_l` and `D_l` at λ ∈ {0.2, .., 1}, `G^1..G^3`.
pub fn named_functors() -> Vec<FunctorSpec> {
    let mut out = vec![
        FunctorSpec::single(Functor::SPower(1)),
        FunctorSpec::single(Functor::DPower(1)),
    ];
    for i in 1..=5 {
        let l = f64::from(i) / 5.0;
        out.push(FunctorSpec::single(Functor::SLambda(l)));
        out.push(FunctorSpec::single(Functor::DLambda(l)));
    }
    out.extend((1..=3).map(|n| FunctorSpec::single(Functor::GroupPower(n))));
    out
}

fn random_trajectory(rng: &mut impl Rng, cfg: &SuiteConfig) -> Vec<StateVec> {
    let dim = rng.gen_range(1..=cfg.max_dim);
    let len = rng.gen_range(1..=cfg.max_len);
    (0..len)
        .map(|_| StateVec::new((0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()).expect("finite"))
        .collect()
}

/// Largest entrywise error of `decode(aggregate(traj))` over all
/// trajectories.
pub fn roundtrip_error(spec: &FunctorSpec, trajectories: &[Vec<StateVec>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for traj in trajectories {
        let agg = run(spec.aggregator()?.as_mut(), traj)?;
        let back = run(spec.decoder()?.as_mut(), &agg)?;
        for (a, b) in traj.iter().zip(&back) {
            let e = a.max_abs_diff(b);
            worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
        }
    }
    Ok(worst)
}

pub fn reversibility_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trajectories: Vec<Vec<StateVec>> = (0..cfg.trajectories)
        .map(|_| random_trajectory(&mut rng, cfg))
        .collect();
    let mut specs = named_functors();
    specs.extend(
        (0..cfg.random_kernels).map(|_| FunctorSpec::single(Functor::Conv(random_band_kernel(&mut rng, cfg.max_band)))),
    );
    let outcomes = specs
        .par_iter()
        .map(|spec| {
            let max_error = roundtrip_error(spec, &trajectories)?;
            let inverse_growth = match spec.parts() {
                [Functor::Conv(k)] => {
                    let c = invert_coefficients(&k.coefficients(cfg.max_len), cfg.max_len)?;
                    Some(c.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
                }
                _ => None,
            };
            Ok(FunctorOutcome {
                spec: spec.to_string(),
                max_error,
                inverse_growth,
                pass: max_error <= ROUNDTRIP_TOL,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport {
        pass: outcomes.iter().all(|o| o.pass),
        tolerance: ROUNDTRIP_TOL,
        trajectories: cfg.trajectories,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let Kernel::Band(w) = random_band_kernel(&mut rng, 8) else {
                unreachable!()
            };
            assert!((1..=8).contains(&w.len()));
            assert!((0.5..=2.0).contains(&w[0].abs()));
            assert!(w[1..].iter().all(|x| x.abs() <= 2.0));
        }
    }

    #[test]
    fn small_suite_named_functors_pass() {
        let cfg = SuiteConfig {
            trajectories: 20,
            random_kernels: 0,
            ..SuiteConfig::default()
        };
        let report = reversibility_suite(&cfg).unwrap();
        assert_eq!(report.outcomes.len(), 15);
        assert!(report.pass, "{:?}", report.failures().collect::<Vec<_>>());
    }
}
