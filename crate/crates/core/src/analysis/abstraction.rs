//! The two functors between tabular and non-Markovian processes on finite
//! instances: the non-Markov embedding `N` (look at the last state only) and
//! the Markov abstraction `M` (histories become states).

use std::collections::BTreeMap;
use std::sync::Arc;

use super::report::{Report, Violation};
use crate::error::{Error, Result};
use crate::process::{Dist, FiniteMdp, History, NmdpOracle, Outcome, StateVec, PROB_TOL};

/// Default bound on the number of enumerated histories.
pub const DEFAULT_HISTORY_CAP: usize = 100_000;

/// A tabular process viewed as a non-Markovian one that ignores everything
/// but the last state of the history.
#[derive(Clone, Debug)]
pub struct NonMarkovEmbedding {
    mdp: Arc<FiniteMdp>,
}

pub fn build_nonmarkov_embedding(mdp: Arc<FiniteMdp>) -> NonMarkovEmbedding {
    NonMarkovEmbedding { mdp }
}

impl NonMarkovEmbedding {
    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }
}

impl NmdpOracle for NonMarkovEmbedding {
    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn initial(&self) -> Result<Vec<(StateVec, f64)>> {
        Ok(self
            .mdp
            .rho0()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| (self.mdp.embed(s).clone(), p))
            .collect())
    }

    fn transition(&self, history: &History, action: usize) -> Result<Dist> {
        if action >= self.mdp.num_actions() {
            return Err(Error::InvalidAction {
                action,
                num_actions: self.mdp.num_actions(),
            });
        }
        let last = history.last_state();
        let s = self
            .mdp
            .identify(last)
            .ok_or_else(|| Error::Undecodable(format!("{last:?} is not an embedded state")))?;
        Ok(Dist::new(
            self.mdp
                .outcomes(s, action)
                .iter()
                .map(|o| (self.mdp.embed(o.next).clone(), o.reward, o.prob))
                .collect(),
        ))
    }
}

/// Explicit tabular process over the reachable histories of an oracle.
/// State `i` of `mdp` is `histories[i]`. Histories at the horizon loop onto
/// themselves with reward 0 under every action.
#[derive(Clone, Debug)]
pub struct HistoryMdp {
    pub mdp: FiniteMdp,
    pub histories: Vec<History>,
    pub horizon: usize,
}

impl HistoryMdp {
    pub fn num_histories(&self) -> usize {
        self.histories.len()
    }
}

pub fn build_markov_abstraction(oracle: &dyn NmdpOracle, horizon: usize) -> Result<HistoryMdp> {
    build_markov_abstraction_capped(oracle, horizon, DEFAULT_HISTORY_CAP)
}

pub fn build_markov_abstraction_capped(oracle: &dyn NmdpOracle, horizon: usize, cap: usize) -> Result<HistoryMdp> {
    let actions = oracle.num_actions();
    if actions == 0 {
        return Err(Error::Validation("oracle has no actions".into()));
    }
    let initial = oracle.initial()?;
    let mut histories: Vec<History> = Vec::new();
    let mut rho0 = Vec::new();
    for (s, _, p) in Dist::new(initial.into_iter().map(|(s, p)| (s, 0.0, p)).collect()).entries() {
        histories.push(History::new(s.clone()));
        rho0.push(*p);
    }
    let explode = |count| Error::StateExplosion { count, cap };
    if histories.len() > cap {
        return Err(explode(histories.len()));
    }
    let mut outcomes: Vec<Vec<Vec<Outcome>>> = Vec::new();
    let mut i = 0;
    while i < histories.len() {
        let h = histories[i].clone();
        if h.t() >= horizon {
            outcomes.push(
                (0..actions)
                    .map(|_| {
                        vec![Outcome {
                            next: i,
                            reward: 0.0,
                            prob: 1.0,
                        }]
                    })
                    .collect(),
            );
        } else {
            let mut per_action = Vec::with_capacity(actions);
            for a in 0..actions {
                let d = oracle.transition(&h, a)?;
                let mut row = Vec::with_capacity(d.entries().len());
                for (next, r, p) in d.entries() {
                    row.push(Outcome {
                        next: histories.len(),
                        reward: *r,
                        prob: *p,
                    });
                    histories.push(h.extended(a, *r, next.clone()));
                    if histories.len() > cap {
                        return Err(explode(histories.len()));
                    }
                }
                per_action.push(row);
            }
            outcomes.push(per_action);
        }
        i += 1;
    }
    rho0.resize(histories.len(), 0.0);
    let mdp = FiniteMdp::with_index_embedding(rho0, outcomes)?;
    Ok(HistoryMdp {
        mdp,
        histories,
        horizon,
    })
}

fn identify(m: &FiniteMdp, v: &StateVec, what: &str) -> Result<usize> {
    m.identify(v)
        .ok_or_else(|| Error::Undecodable(format!("{what} {v:?} is not an embedded state")))
}

/// Mass per `(next, reward)` key.
fn masses(row: impl Iterator<Item = (usize, f64, f64)>) -> BTreeMap<(usize, u64), f64> {
    let mut out = BTreeMap::new();
    for (next, r, p) in row {
        *out.entry((next, r.to_bits())).or_insert(0.0) += p;
    }
    out
}

/// Compares `abstraction`, read back through the last-state correspondence,
/// against `m` on the initial distribution and on every non-terminal
/// `(history, action)` cell.
pub fn check_roundtrip(m: &FiniteMdp, abstraction: &HistoryMdp) -> Result<Report> {
    let last: Vec<usize> = abstraction
        .histories
        .iter()
        .map(|h| identify(m, h.last_state(), "last state"))
        .collect::<Result<_>>()?;
    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;

    let mut init = vec![0.0; m.num_states()];
    for (i, p) in abstraction.mdp.rho0().iter().enumerate() {
        init[last[i]] += p;
    }
    for (s, (&expected, &got)) in m.rho0().iter().zip(&init).enumerate() {
        worst = worst.max((expected - got).abs());
        if (expected - got).abs() > PROB_TOL {
            violations.push(Violation {
                location: format!("rho0 state {s}"),
                expected,
                got,
            });
        }
    }

    for (i, h) in abstraction.histories.iter().enumerate() {
        if h.t() >= abstraction.horizon {
            continue;
        }
        for a in 0..m.num_actions() {
            let expected = masses(m.outcomes(last[i], a).iter().map(|o| (o.next, o.reward, o.prob)));
            let got = masses(
                abstraction
                    .mdp
                    .outcomes(i, a)
                    .iter()
                    .map(|o| (last[o.next], o.reward, o.prob)),
            );
            let keys: std::collections::BTreeSet<_> = expected.keys().chain(got.keys()).copied().collect();
            for key in keys {
                let e = expected.get(&key).copied().unwrap_or(0.0);
                let g = got.get(&key).copied().unwrap_or(0.0);
                worst = worst.max((e - g).abs());
                if (e - g).abs() > PROB_TOL {
                    violations.push(Violation {
                        location: format!(
                            "history {i} (t={}, state {}), action {a}, outcome (state {}, reward {})",
                            h.t(),
                            last[i],
                            key.0,
                            f64::from_bits(key.1)
                        ),
                        expected: e,
                        got: g,
                    });
                }
            }
        }
    }
    let mut report = Report::from_violations(violations);
    report.max_discrepancy = Some(worst);
    report.notes.push(format!(
        "{} history-states up to horizon {}",
        abstraction.num_histories(),
        abstraction.horizon
    ));
    Ok(report)
}

/// Builds `M(N(m))` up to `horizon` and checks it against `m`.
pub fn verify_equivalence_roundtrip(m: &FiniteMdp, horizon: usize) -> Result<Report> {
    let embedding = build_nonmarkov_embedding(Arc::new(m.clone()));
    let abstraction = build_markov_abstraction(&embedding, horizon)?;
    check_roundtrip(m, &abstraction)
}
