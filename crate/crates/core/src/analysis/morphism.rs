//! Pointwise checking of morphisms between tabular processes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{Report, Violation};
use crate::error::{Error, Result};
use crate::process::{FiniteMdp, PROB_TOL};

/// Finite maps on states, actions and rewards. Serialized as
/// `{"states": [..], "actions": [..], "rewards": [[from, to], ..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Morphism {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<(f64, f64)>,
}

impl Morphism {
    pub fn identity(m: &FiniteMdp) -> Morphism {
        Morphism {
            states: (0..m.num_states()).collect(),
            actions: (0..m.num_actions()).collect(),
            rewards: m.reward_support().into_iter().map(|r| (r, r)).collect(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Morphism> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Morphism> {
        Morphism::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn map_reward(&self, r: f64) -> Option<f64> {
        self.rewards.iter().find(|(from, _)| *from == r).map(|(_, to)| *to)
    }

    /// `then ∘ self`. Rewards outside `then`'s table are dropped.
    pub fn compose(&self, then: &Morphism) -> Result<Morphism> {
        let pick = |map: &[usize], x: usize, what: &str| {
            map.get(x)
                .copied()
                .ok_or_else(|| Error::Validation(format!("{what} {x} is outside the second map")))
        };
        Ok(Morphism {
            states: self
                .states
                .iter()
                .map(|&s| pick(&then.states, s, "state"))
                .collect::<Result<_>>()?,
            actions: self
                .actions
                .iter()
                .map(|&a| pick(&then.actions, a, "action"))
                .collect::<Result<_>>()?,
            rewards: self
                .rewards
                .iter()
                .filter_map(|&(from, mid)| then.map_reward(mid).map(|to| (from, to)))
                .collect(),
        })
    }

    fn validate(&self, m: &FiniteMdp, m2: &FiniteMdp) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.states.len() != m.num_states() {
            return bad(format!(
                "state map has {} entries, source has {} states",
                self.states.len(),
                m.num_states()
            ));
        }
        if let Some(s) = self.states.iter().find(|&&s| s >= m2.num_states()) {
            return bad(format!(
                "state map target {s} is out of range ({} states)",
                m2.num_states()
            ));
        }
        if self.actions.len() != m.num_actions() {
            return bad(format!(
                "action map has {} entries, source has {} actions",
                self.actions.len(),
                m.num_actions()
            ));
        }
        if let Some(a) = self.actions.iter().find(|&&a| a >= m2.num_actions()) {
            return bad(format!(
                "action map target {a} is out of range ({} actions)",
                m2.num_actions()
            ));
        }
        if let Some(r) = m.reward_support().into_iter().find(|&r| self.map_reward(r).is_none()) {
            return bad(format!("reward map does not cover reward {r}"));
        }
        Ok(())
    }
}

fn mass(m: &FiniteMdp, s: usize, a: usize, next: usize, r: f64) -> f64 {
    m.outcomes(s, a)
        .iter()
        .filter(|o| o.next == next && o.reward == r)
        .map(|o| o.prob)
        .sum()
}

/// Checks `ρ0(s) = ρ0'(φS(s))` for every state and
/// `T(s,a)(s'',r) = T'(φS s, φA a)(φS s'', φR r)` for every state pair,
/// action and reward in the support of `m`, both read literally.
pub fn verify_morphism(m: &FiniteMdp, m2: &FiniteMdp, phi: &Morphism) -> Result<Report> {
    phi.validate(m, m2)?;
    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;
    let mut check = |location: &dyn Fn() -> String, expected: f64, got: f64| {
        worst = worst.max((expected - got).abs());
        if (expected - got).abs() > PROB_TOL {
            violations.push(Violation {
                location: location(),
                expected,
                got,
            });
        }
    };
    for s in 0..m.num_states() {
        check(&|| format!("rho0 state {s}"), m.rho0()[s], m2.rho0()[phi.states[s]]);
    }
    let support = m.reward_support();
    for s in 0..m.num_states() {
        for a in 0..m.num_actions() {
            for next in 0..m.num_states() {
                for &r in &support {
                    let r2 = phi.map_reward(r).expect("validated");
                    check(
                        &|| format!("T state {s}, action {a}, outcome (state {next}, reward {r})"),
                        mass(m, s, a, next, r),
                        mass(m2, phi.states[s], phi.actions[a], phi.states[next], r2),
                    );
                }
            }
        }
    }
    let mut report = Report::from_violations(violations);
    report.max_discrepancy = Some(worst);
    Ok(report)
}
