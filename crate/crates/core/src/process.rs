//! States, histories and finite tabular decision processes.
//!
//! A [`FiniteMdp`] is time-homogeneous: one outcome table serves every
//! timestep. Processes whose dynamics vary with time can be brought into this
//! form by folding the timestep into the state.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability sums and exact distribution comparison.
pub const PROB_TOL: f64 = 1e-12;
/// Tolerance for matching a decoded vector against an embedded state.
pub const DECODE_TOL: f64 = 1e-9;

/// A finite real vector in ℝᵏ.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVec(Vec<f64>);

impl StateVec {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyComponent("state vector"));
        }
        if let Some(i) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(StateVec(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        StateVec(vec![0.0; dim.max(1)])
    }

    pub fn one_hot(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        StateVec(v)
    }

    pub fn scalar(x: f64) -> Self {
        StateVec(vec![x])
    }

    /// Vectors produced by arithmetic on valid vectors; entries may overflow
    /// only in pathological cases, which the aggregators never produce for
    /// bounded inputs.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        StateVec(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &StateVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &StateVec, tol: f64) -> bool {
        self.dim() == other.dim() && self.max_abs_diff(other) <= tol
    }

    pub fn total_cmp(&self, other: &StateVec) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.dim().cmp(&other.dim())
    }
}

impl TryFrom<Vec<f64>> for StateVec {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        StateVec::new(v)
    }
}

impl From<StateVec> for Vec<f64> {
    fn from(v: StateVec) -> Self {
        v.0
    }
}

impl fmt::Debug for StateVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// `(s_{0:t}, a_{0:t-1}, r_{0:t-1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    states: Vec<StateVec>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
}

impl History {
    pub fn new(s0: StateVec) -> Self {
        History {
            states: vec![s0],
            actions: Vec::new(),
            rewards: Vec::new(),
        }
    }

    pub fn from_parts(states: Vec<StateVec>, actions: Vec<usize>, rewards: Vec<f64>) -> Result<Self> {
        if states.is_empty() || states.len() != actions.len() + 1 || actions.len() != rewards.len() {
            return Err(Error::MalformedHistory(format!(
                "|states| = {}, |actions| = {}, |rewards| = {}",
                states.len(),
                actions.len(),
                rewards.len()
            )));
        }
        let dim = states[0].dim();
        for s in &states {
            s.check_dim(dim)?;
        }
        Ok(History {
            states,
            actions,
            rewards,
        })
    }

    /// Extends the history by one transition.
    pub fn push(&mut self, action: usize, reward: f64, next: StateVec) {
        self.actions.push(action);
        self.rewards.push(reward);
        self.states.push(next);
    }

    pub fn extended(&self, action: usize, reward: f64, next: StateVec) -> History {
        let mut h = self.clone();
        h.push(action, reward, next);
        h
    }

    /// The current timestep `t`.
    pub fn t(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[StateVec] {
        &self.states
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn last_state(&self) -> &StateVec {
        self.states.last().expect("history always holds s0")
    }

    pub fn last_action(&self) -> Result<usize> {
        self.actions.last().copied().ok_or(Error::EmptyComponent("actions"))
    }

    pub fn last_reward(&self) -> Result<f64> {
        self.rewards.last().copied().ok_or(Error::EmptyComponent("rewards"))
    }

    /// `σ_i(h, s)`: the same history with state `i` replaced.
    pub fn with_state(&self, index: usize, state: StateVec) -> History {
        let mut h = self.clone();
        h.states[index] = state;
        h
    }

    /// Proper-prefix relation `self ≺ other`.
    pub fn is_prefix_of(&self, other: &History) -> bool {
        self.t() < other.t()
            && other.states.starts_with(&self.states)
            && other.actions.starts_with(&self.actions)
            && other.rewards.starts_with(&self.rewards)
    }
}

/// One entry of an outcome list: next state, reward and probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub next: usize,
    pub reward: f64,
    pub prob: f64,
}

/// Sorts by `(next, reward)` and merges duplicate pairs.
pub fn canonical_row(row: &[Outcome]) -> Vec<Outcome> {
    let mut sorted = row.to_vec();
    sorted.sort_by(|a, b| a.next.cmp(&b.next).then(a.reward.total_cmp(&b.reward)));
    let mut out: Vec<Outcome> = Vec::with_capacity(sorted.len());
    for o in sorted {
        match out.last_mut() {
            Some(last) if last.next == o.next && last.reward == o.reward => last.prob += o.prob,
            _ => out.push(o),
        }
    }
    out
}

/// Largest per-atom probability difference between two outcome lists, atoms
/// keyed by exact `(next, reward)`.
pub fn row_discrepancy(a: &[Outcome], b: &[Outcome]) -> f64 {
    let a = canonical_row(a);
    let b = canonical_row(b);
    let mut worst: f64 = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.next.cmp(&y.next).then(x.reward.total_cmp(&y.reward)),
            (Some(_), None) => Ordering::Less,
            (None, _) => Ordering::Greater,
        };
        match ord {
            Ordering::Equal => {
                worst = worst.max((a[i].prob - b[j].prob).abs());
                i += 1;
                j += 1;
            }
            Ordering::Less => {
                worst = worst.max(a[i].prob.abs());
                i += 1;
            }
            Ordering::Greater => {
                worst = worst.max(b[j].prob.abs());
                j += 1;
            }
        }
    }
    worst
}

/// Comparison of two outcome lists after canonicalization, probabilities
/// within [`PROB_TOL`].
pub fn rows_equal(a: &[Outcome], b: &[Outcome]) -> bool {
    row_discrepancy(a, b) <= PROB_TOL
}

/// A tabular decision process with an injective embedding of its states
/// into ℝᵏ.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    rho0: Vec<f64>,
    outcomes: Vec<Vec<Vec<Outcome>>>,
    embedding: Vec<StateVec>,
}

#[derive(Serialize, Deserialize)]
struct MdpFile {
    num_states: usize,
    num_actions: usize,
    rho0: Vec<f64>,
    outcomes: Vec<Vec<Vec<Outcome>>>,
    embedding: Vec<Vec<f64>>,
}

fn check_distribution(what: &str, probs: impl Iterator<Item = f64>) -> std::result::Result<(), String> {
    let mut sum = 0.0;
    for p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(format!("{what}: probability {p} is negative or non-finite"));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(format!("{what}: probabilities sum to {sum}, not 1"));
    }
    Ok(())
}

impl FiniteMdp {
    pub fn new(rho0: Vec<f64>, outcomes: Vec<Vec<Vec<Outcome>>>, embedding: Vec<StateVec>) -> Result<Self> {
        let num_states = rho0.len();
        let num_actions = outcomes.first().map_or(0, |row| row.len());
        let mdp = FiniteMdp {
            num_states,
            num_actions,
            rho0,
            outcomes,
            embedding,
        };
        mdp.validate(true).map_err(|(_, msg)| Error::InvalidMdp(msg))?;
        Ok(mdp)
    }

    /// Process whose state `i` is embedded as the scalar `i`, injective by
    /// construction. Skips the quadratic embedding check, so it suits large
    /// generated state sets.
    pub fn with_index_embedding(rho0: Vec<f64>, outcomes: Vec<Vec<Vec<Outcome>>>) -> Result<Self> {
        let num_states = rho0.len();
        let num_actions = outcomes.first().map_or(0, |row| row.len());
        let mdp = FiniteMdp {
            num_states,
            num_actions,
            rho0,
            outcomes,
            embedding: (0..num_states).map(|i| StateVec::scalar(i as f64)).collect(),
        };
        mdp.validate(false).map_err(|(_, msg)| Error::InvalidMdp(msg))?;
        Ok(mdp)
    }

    /// Renames state `s` to `perm[s]`, permuting every table consistently.
    pub fn relabel(&self, perm: &[usize]) -> Result<FiniteMdp> {
        let n = self.num_states;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Validation(
                "relabeling must be a permutation of the states".into(),
            ));
        }
        let mut rho0 = vec![0.0; n];
        let mut outcomes = vec![Vec::new(); n];
        let mut embedding = vec![StateVec::zeros(1); n];
        for s in 0..n {
            rho0[perm[s]] = self.rho0[s];
            embedding[perm[s]] = self.embedding[s].clone();
            outcomes[perm[s]] = self.outcomes[s]
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|o| Outcome {
                            next: perm[o.next],
                            ..*o
                        })
                        .collect()
                })
                .collect();
        }
        FiniteMdp::new(rho0, outcomes, embedding)
    }

    /// Checks every invariant; on failure returns the top-level field the
    /// violation lives in together with a message.
    fn validate(&self, check_embedding: bool) -> std::result::Result<(), (&'static str, String)> {
        if self.num_states == 0 {
            return Err(("num_states", "at least one state is required".into()));
        }
        if self.num_actions == 0 {
            return Err(("num_actions", "at least one action is required".into()));
        }
        if self.rho0.len() != self.num_states {
            return Err((
                "rho0",
                format!("expected {} entries, got {}", self.num_states, self.rho0.len()),
            ));
        }
        check_distribution("rho0", self.rho0.iter().copied()).map_err(|m| ("rho0", m))?;
        if self.outcomes.len() != self.num_states {
            return Err((
                "outcomes",
                format!("expected {} state rows, got {}", self.num_states, self.outcomes.len()),
            ));
        }
        for (s, per_action) in self.outcomes.iter().enumerate() {
            if per_action.len() != self.num_actions {
                return Err((
                    "outcomes",
                    format!(
                        "outcomes[{s}]: expected {} actions, got {}",
                        self.num_actions,
                        per_action.len()
                    ),
                ));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.is_empty() {
                    return Err(("outcomes", format!("outcomes[{s}][{a}] is empty")));
                }
                for o in row {
                    if o.next >= self.num_states {
                        return Err((
                            "outcomes",
                            format!("outcomes[{s}][{a}]: next state {} out of range", o.next),
                        ));
                    }
                    if !o.reward.is_finite() {
                        return Err(("outcomes", format!("outcomes[{s}][{a}]: non-finite reward")));
                    }
                }
                check_distribution(&format!("outcomes[{s}][{a}]"), row.iter().map(|o| o.prob))
                    .map_err(|m| ("outcomes", m))?;
            }
        }
        if self.embedding.len() != self.num_states {
            return Err((
                "embedding",
                format!("expected {} vectors, got {}", self.num_states, self.embedding.len()),
            ));
        }
        let dim = self.embedding[0].dim();
        for (s, v) in self.embedding.iter().enumerate() {
            if v.dim() != dim {
                return Err((
                    "embedding",
                    format!("embedding[{s}] has dimension {}, expected {dim}", v.dim()),
                ));
            }
        }
        if !check_embedding {
            return Ok(());
        }
        for i in 0..self.num_states {
            for j in i + 1..self.num_states {
                if self.embedding[i].approx_eq(&self.embedding[j], DECODE_TOL) {
                    return Err(("embedding", format!("embedding[{i}] and embedding[{j}] coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    pub fn outcomes(&self, state: usize, action: usize) -> &[Outcome] {
        &self.outcomes[state][action]
    }

    pub fn embedding(&self) -> &[StateVec] {
        &self.embedding
    }

    pub fn embed(&self, state: usize) -> &StateVec {
        &self.embedding[state]
    }

    pub fn dim(&self) -> usize {
        self.embedding[0].dim()
    }

    /// Index of the embedded state nearest to `v`, if within [`DECODE_TOL`].
    pub fn identify(&self, v: &StateVec) -> Option<usize> {
        if v.dim() != self.dim() {
            return None;
        }
        self.embedding
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.max_abs_diff(v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|(_, d)| *d <= DECODE_TOL)
            .map(|(i, _)| i)
    }

    /// Finite reward support, sorted and deduplicated.
    pub fn reward_support(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.outcomes.iter().flatten().flatten().map(|o| o.reward).collect();
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    }

    /// True iff two distinct states have identical outcome distributions
    /// under every action.
    pub fn is_degenerate(&self) -> bool {
        (0..self.num_states).any(|s| {
            (s + 1..self.num_states)
                .any(|s2| (0..self.num_actions).all(|a| rows_equal(&self.outcomes[s][a], &self.outcomes[s2][a])))
        })
    }

    /// Returns a copy with one outcome probability replaced. Bypasses
    /// validation; used to build fault-injected mutants.
    pub fn with_prob_unchecked(&self, state: usize, action: usize, index: usize, prob: f64) -> FiniteMdp {
        let mut m = self.clone();
        m.outcomes[state][action][index].prob = prob;
        m
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: MdpFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        if file.rho0.len() != file.num_states {
            return Err(Error::Parse {
                line: key_line(text, "rho0"),
                msg: format!(
                    "rho0 has {} entries but num_states = {}",
                    file.rho0.len(),
                    file.num_states
                ),
            });
        }
        let mut embedding = Vec::with_capacity(file.embedding.len());
        for (s, v) in file.embedding.into_iter().enumerate() {
            embedding.push(StateVec::new(v).map_err(|e| Error::Parse {
                line: key_line(text, "embedding"),
                msg: format!("embedding[{s}]: {e}"),
            })?);
        }
        let mdp = FiniteMdp {
            num_states: file.num_states,
            num_actions: file.num_actions,
            rho0: file.rho0,
            outcomes: file.outcomes,
            embedding,
        };
        mdp.validate(true).map_err(|(key, msg)| Error::Parse {
            line: key_line(text, key),
            msg,
        })?;
        Ok(mdp)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        let file = MdpFile {
            num_states: self.num_states,
            num_actions: self.num_actions,
            rho0: self.rho0.clone(),
            outcomes: self.outcomes.clone(),
            embedding: self.embedding.iter().map(|v| v.as_slice().to_vec()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("MDP serializes")
    }
}

/// 1-based line of the first occurrence of `"key"` in `text`, or 1.
fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map(|pos| text[..pos].matches('\n').count() + 1)
        .unwrap_or(1)
}

/// A finite distribution over `(observation, reward)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Dist {
    entries: Vec<(StateVec, f64, f64)>,
}

impl Dist {
    /// Builds a canonical distribution: entries sorted by observation then
    /// reward, exact duplicates merged, zero-mass entries dropped.
    pub fn new(mut entries: Vec<(StateVec, f64, f64)>) -> Self {
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut out: Vec<(StateVec, f64, f64)> = Vec::with_capacity(entries.len());
        for (v, r, p) in entries {
            match out.last_mut() {
                Some(last) if last.0 == v && last.1 == r => last.2 += p,
                _ => out.push((v, r, p)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        Dist { entries: out }
    }

    pub fn entries(&self) -> &[(StateVec, f64, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    /// Largest per-atom probability discrepancy, with atoms matched when
    /// observations agree within `key_tol` and rewards are equal.
    pub fn discrepancy(&self, other: &Dist, key_tol: f64) -> f64 {
        let mut matched = vec![false; other.entries.len()];
        let mut worst: f64 = 0.0;
        for (v, r, p) in &self.entries {
            let mut mass = 0.0;
            for (j, (v2, r2, p2)) in other.entries.iter().enumerate() {
                if !matched[j] && r == r2 && v.approx_eq(v2, key_tol) {
                    matched[j] = true;
                    mass += p2;
                }
            }
            worst = worst.max((p - mass).abs());
        }
        for (j, e) in other.entries.iter().enumerate() {
            if !matched[j] {
                worst = worst.max(e.2);
            }
        }
        worst
    }

    pub fn approx_eq(&self, other: &Dist, key_tol: f64, prob_tol: f64) -> bool {
        self.discrepancy(other, key_tol) <= prob_tol
    }
}

/// A non-Markovian process given by its transition evaluator.
pub trait NmdpOracle: Sync {
    fn num_actions(&self) -> usize;

    /// Initial distribution over observations.
    fn initial(&self) -> Result<Vec<(StateVec, f64)>>;

    /// Distribution over `(next observation, reward)` given a history.
    fn transition(&self, history: &History, action: usize) -> Result<Dist>;

    /// The underlying state the oracle decodes from `history`, as a raw
    /// vector, when the oracle is built on a decoder. Decoded vectors need
    /// not lie on the embedding.
    fn decode_current(&self, _history: &History) -> Option<Result<StateVec>> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(x: &[f64]) -> StateVec {
        StateVec::new(x.to_vec()).unwrap()
    }

    fn two_state(row0: Vec<Outcome>, row1: Vec<Outcome>) -> FiniteMdp {
        FiniteMdp::new(
            vec![1.0, 0.0],
            vec![vec![row0], vec![row1]],
            vec![sv(&[0.0]), sv(&[1.0])],
        )
        .unwrap()
    }

    #[test]
    fn accessors() {
        let mut h = History::new(sv(&[1.0]));
        assert!(matches!(h.last_reward(), Err(Error::EmptyComponent(_))));
        assert!(matches!(h.last_action(), Err(Error::EmptyComponent(_))));
        h.push(0, 0.5, sv(&[2.0]));
        h.push(1, 1.5, sv(&[3.0]));
        assert_eq!(h.states(), &[sv(&[1.0]), sv(&[2.0]), sv(&[3.0])]);
        assert_eq!(h.last_state(), &sv(&[3.0]));
        assert_eq!(h.last_state(), h.states().last().unwrap());
        assert_eq!(h.last_action().unwrap(), 1);
        assert_eq!(h.last_reward().unwrap(), 1.5);
        assert_eq!(h.t(), 2);
    }

    #[test]
    fn prefix_relation() {
        let h = History::new(sv(&[0.0]));
        let h2 = h.extended(1, 0.0, sv(&[1.0]));
        assert!(h.is_prefix_of(&h2));
        assert!(!h2.is_prefix_of(&h));
        assert!(!h.is_prefix_of(&h));
        let other = History::new(sv(&[5.0])).extended(1, 0.0, sv(&[1.0]));
        assert!(!h.is_prefix_of(&other));
    }

    #[test]
    fn malformed_history_rejected() {
        assert!(History::from_parts(vec![sv(&[0.0])], vec![0], vec![]).is_err());
        assert!(History::from_parts(vec![sv(&[0.0]), sv(&[0.0, 1.0])], vec![0], vec![0.0]).is_err());
    }

    #[test]
    fn non_finite_state_rejected() {
        assert!(matches!(StateVec::new(vec![1.0, f64::NAN]), Err(Error::NonFinite(1))));
        assert!(StateVec::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn single_state_is_not_degenerate() {
        let m = FiniteMdp::new(
            vec![1.0],
            vec![vec![vec![Outcome {
                next: 0,
                reward: 0.0,
                prob: 1.0,
            }]]],
            vec![sv(&[0.0])],
        )
        .unwrap();
        assert!(!m.is_degenerate());
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let row = vec![Outcome {
            next: 0,
            reward: 1.0,
            prob: 1.0,
        }];
        assert!(two_state(row.clone(), row).is_degenerate());
    }

    #[test]
    fn row_comparison_is_order_insensitive() {
        let a = vec![
            Outcome {
                next: 0,
                reward: 0.0,
                prob: 0.25,
            },
            Outcome {
                next: 1,
                reward: 0.0,
                prob: 0.5,
            },
            Outcome {
                next: 0,
                reward: 0.0,
                prob: 0.25,
            },
        ];
        let b = vec![
            Outcome {
                next: 1,
                reward: 0.0,
                prob: 0.5,
            },
            Outcome {
                next: 0,
                reward: 0.0,
                prob: 0.5,
            },
        ];
        assert!(rows_equal(&a, &b));
        assert!(two_state(a, b).is_degenerate());
    }

    #[test]
    fn invalid_distributions_rejected() {
        let bad = FiniteMdp::new(
            vec![0.5],
            vec![vec![vec![Outcome {
                next: 0,
                reward: 0.0,
                prob: 1.0,
            }]]],
            vec![sv(&[0.0])],
        );
        assert!(matches!(bad, Err(Error::InvalidMdp(_))));
        let bad = FiniteMdp::new(
            vec![1.0],
            vec![vec![vec![Outcome {
                next: 0,
                reward: 0.0,
                prob: 0.9,
            }]]],
            vec![sv(&[0.0])],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn non_injective_embedding_rejected() {
        let row = vec![Outcome {
            next: 0,
            reward: 0.0,
            prob: 1.0,
        }];
        let bad = FiniteMdp::new(
            vec![1.0, 0.0],
            vec![vec![row.clone()], vec![row]],
            vec![sv(&[1.0]), sv(&[1.0])],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn identify_uses_tolerance() {
        let row = vec![Outcome {
            next: 0,
            reward: 0.0,
            prob: 1.0,
        }];
        let m = two_state(
            row.clone(),
            vec![Outcome {
                next: 1,
                reward: 0.0,
                prob: 1.0,
            }],
        );
        assert_eq!(m.identify(&sv(&[1.0 + 1e-12])), Some(1));
        assert_eq!(m.identify(&sv(&[0.5])), None);
    }

    #[test]
    fn row_discrepancy_counts_unmatched_mass() {
        let a = [
            Outcome {
                next: 0,
                reward: 0.0,
                prob: 0.7,
            },
            Outcome {
                next: 1,
                reward: 0.0,
                prob: 0.3,
            },
        ];
        let b = [
            Outcome {
                next: 0,
                reward: 0.0,
                prob: 0.7,
            },
            Outcome {
                next: 1,
                reward: 1.0,
                prob: 0.3,
            },
        ];
        assert_eq!(row_discrepancy(&a, &b), 0.3);
        assert_eq!(row_discrepancy(&a, &a), 0.0);
    }

    #[test]
    fn relabel_rejects_non_permutations() {
        let row = vec![Outcome {
            next: 1,
            reward: 0.0,
            prob: 1.0,
        }];
        let m = two_state(row.clone(), row);
        assert!(m.relabel(&[0, 0]).is_err());
        assert!(m.relabel(&[0]).is_err());
        let r = m.relabel(&[1, 0]).unwrap();
        assert_eq!(r.outcomes(1, 0)[0].next, 0);
        assert_eq!(r.rho0(), &[0.0, 1.0]);
    }

    #[test]
    fn json_round_trip() {
        let m = two_state(
            vec![Outcome {
                next: 1,
                reward: 0.5,
                prob: 1.0,
            }],
            vec![Outcome {
                next: 0,
                reward: 0.0,
                prob: 1.0,
            }],
        );
        let back = FiniteMdp::from_json_str(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn json_errors_carry_lines() {
        let text = "{\n  \"num_states\": 1,\n  \"num_actions\": 1,\n  \"rho0\": [0.5],\n  \"outcomes\": [[[{\"next\": 0, \"reward\": 0.0, \"prob\": 1.0}]]],\n  \"embedding\": [[0.0]]\n}";
        match FiniteMdp::from_json_str(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("rho0"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match FiniteMdp::from_json_str("{\n \"num_states\": 1,\n oops }") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dist_discrepancy() {
        let a = Dist::new(vec![
            (sv(&[1.0]), 0.0, 0.5),
            (sv(&[2.0]), 0.0, 0.25),
            (sv(&[1.0]), 0.0, 0.25),
        ]);
        assert_eq!(a.entries().len(), 2);
        let b = Dist::new(vec![(sv(&[2.0 + 1e-12]), 0.0, 0.25), (sv(&[1.0]), 0.0, 0.75)]);
        assert!(a.approx_eq(&b, 1e-9, 1e-12));
        let c = Dist::new(vec![(sv(&[1.0]), 1.0, 0.75), (sv(&[2.0]), 0.0, 0.25)]);
        assert_eq!(a.discrepancy(&c, 1e-9), 0.75);
    }
}
