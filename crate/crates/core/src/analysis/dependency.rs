//! State dependency structure of a history: the positions whose state, when
//! substituted, changes the transition law.

use std::collections::BTreeMap;

use super::report::DependencyStructure;
use crate::aggregators::{invert_coefficients, FunctorSpec};
use crate::error::{Error, Result};
use crate::process::{Dist, History, NmdpOracle, StateVec, DECODE_TOL, PROB_TOL};

/// Nonzero threshold for `(w⁻¹)_{0,τ}`.
pub const WEIGHT_TOL: f64 = 1e-9;
/// Tolerance when matching next observations of two distributions.
const KEY_TOL: f64 = 1e-9;
/// Below this the decoder is treated as not responding to a perturbation.
const RESPONSE_TOL: f64 = 1e-12;

/// Result of the exhaustive perturbation test.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmpiricalDependency {
    pub structure: DependencyStructure,
    /// Substitutions that produced an undecodable history and were skipped.
    pub skipped: usize,
    /// Substitutions evaluated.
    pub probes: usize,
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> StateVec {
    StateVec::from_raw(y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect())
}

fn sub(x: &StateVec, y: &StateVec) -> Vec<f64> {
    x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a - b).collect()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Substitution candidates for position `index`.
///
/// Every pool state is tried verbatim. When the oracle exposes its decoder,
/// each pool state `e` also yields the aggregate value that steers the decoded
/// current state onto `e`: the decoder's response to the perturbation
/// `δ = e - d_t` is measured, and if it is a nonzero multiple `λδ` the
/// candidate `g_i + δ/λ` is added. A perturbation with no response is kept
/// as-is so positions that only shift the next aggregate are still probed.
fn candidates(oracle: &dyn NmdpOracle, h: &History, index: usize, pool: &[StateVec]) -> Result<Vec<StateVec>> {
    let mut out: Vec<StateVec> = pool.to_vec();
    let Some(current) = oracle.decode_current(h) else {
        return Ok(out);
    };
    let current = current?;
    let g = &h.states()[index];
    for e in pool {
        let delta = sub(e, &current);
        let norm2 = dot(&delta, &delta);
        if norm2 == 0.0 {
            continue;
        }
        let probe = axpy(1.0, &delta, g.as_slice());
        let moved = match oracle.decode_current(&h.with_state(index, probe.clone())) {
            Some(Ok(v)) => v,
            Some(Err(e)) => return Err(e),
            None => unreachable!("decoder availability does not change"),
        };
        let response = sub(&moved, &current);
        if response.iter().all(|r| r.abs() <= RESPONSE_TOL) {
            out.push(probe);
            continue;
        }
        let lambda = dot(&response, &delta) / norm2;
        let parallel = response
            .iter()
            .zip(&delta)
            .all(|(r, d)| (r - lambda * d).abs() <= DECODE_TOL * (1.0 + lambda.abs()));
        if parallel && lambda.abs() > RESPONSE_TOL {
            out.push(axpy(1.0 / lambda, &delta, g.as_slice()));
        }
    }
    Ok(out)
}

/// Includes position `i` iff some substitution at `i` changes the transition
/// distribution for some action. Undecodable substitutions are skipped and
/// counted.
pub fn empirical_dependency(oracle: &dyn NmdpOracle, h: &History, pool: &[StateVec]) -> Result<EmpiricalDependency> {
    let actions = oracle.num_actions();
    let base: Vec<Dist> = (0..actions).map(|a| oracle.transition(h, a)).collect::<Result<_>>()?;
    let mut report = EmpiricalDependency {
        structure: DependencyStructure {
            t: h.t(),
            ..Default::default()
        },
        ..Default::default()
    };
    for index in 0..=h.t() {
        let current = &h.states()[index];
        'candidates: for v in candidates(oracle, h, index, pool)? {
            if v == *current {
                continue;
            }
            let perturbed = h.with_state(index, v);
            for (a, reference) in base.iter().enumerate() {
                report.probes += 1;
                match oracle.transition(&perturbed, a) {
                    Ok(d) => {
                        if !d.approx_eq(reference, KEY_TOL, PROB_TOL) {
                            report.structure.indices.push(index);
                            break 'candidates;
                        }
                    }
                    Err(Error::Undecodable(_)) => {
                        report.skipped += 1;
                        continue 'candidates;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(report)
}

/// Predicted dependency structure at time `t`: `[t-n, t] ∩ ℕ` for `G^n`,
/// otherwise `{t-τ : (w⁻¹)_{0,τ} ≠ 0}` for the composition's kernel `w`.
pub fn analytical_dependency(spec: &FunctorSpec, t: usize) -> Result<DependencyStructure> {
    if let Some(n) = spec.group_power() {
        return Ok(DependencyStructure {
            t,
            indices: (t.saturating_sub(n as usize)..=t).collect(),
            weights: None,
        });
    }
    let w = spec
        .effective_kernel(t + 1)
        .ok_or_else(|| Error::Unsupported(format!("`{spec}` is not a convolution; no analytical dependency")))?;
    let inverse = invert_coefficients(&w, t + 1)?;
    let mut weights = BTreeMap::new();
    for (tau, c) in inverse.iter().enumerate() {
        if c.abs() > WEIGHT_TOL {
            weights.insert(t - tau, *c);
        }
    }
    Ok(DependencyStructure {
        t,
        indices: weights.keys().copied().collect(),
        weights: Some(weights),
    })
}

/// Every history reachable under the oracle with `t ≤ max_t`, in
/// breadth-first order.
pub fn reachable_histories(oracle: &dyn NmdpOracle, max_t: usize) -> Result<Vec<History>> {
    let mut out: Vec<History> = oracle.initial()?.into_iter().map(|(s, _)| History::new(s)).collect();
    let mut start = 0;
    for _ in 0..max_t {
        let end = out.len();
        for i in start..end {
            for a in 0..oracle.num_actions() {
                let d = oracle.transition(&out[i], a)?;
                for (next, r, _) in d.entries() {
                    let h = out[i].extended(a, *r, next.clone());
                    out.push(h);
                }
            }
        }
        start = end;
    }
    Ok(out)
}
