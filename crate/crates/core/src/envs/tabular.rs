use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, Step};
use crate::error::{Error, Result};
use crate::process::{FiniteMdp, Outcome, StateVec};

const RANDOM_MDP_RETRIES: usize = 100;
const RANDOM_REWARDS: [f64; 3] = [0.0, 0.5, 1.0];

/// `left = 0`, `right = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainSpec {
    pub length: usize,
    pub slip: f64,
}

/// Chain of `length` states with a goal at the right end. Moves succeed with
/// probability `1 - slip`, otherwise the agent stays put; every transition
/// into the goal pays 1.
pub fn make_chain(spec: &ChainSpec) -> Result<FiniteMdp> {
    let n = spec.length;
    if n < 2 {
        return Err(Error::Validation(format!("chain length {n} must be at least 2")));
    }
    if !(0.0..0.5).contains(&spec.slip) {
        return Err(Error::Validation(format!("slip {} must lie in [0, 0.5)", spec.slip)));
    }
    let goal = n - 1;
    let reward = |next: usize| if next == goal { 1.0 } else { 0.0 };
    let row = |from: usize, to: usize| {
        let mut row = vec![Outcome {
            next: to,
            reward: reward(to),
            prob: 1.0 - spec.slip,
        }];
        if spec.slip > 0.0 {
            row.push(Outcome {
                next: from,
                reward: reward(from),
                prob: spec.slip,
            });
        }
        row
    };
    let outcomes = (0..n)
        .map(|i| vec![row(i, i.saturating_sub(1)), row(i, (i + 1).min(goal))])
        .collect();
    let mut rho0 = vec![0.0; n];
    rho0[0] = 1.0;
    let embedding = (0..n).map(|i| StateVec::one_hot(n, i)).collect();
    FiniteMdp::new(rho0, outcomes, embedding)
}

/// Random tabular process with Dirichlet(1) outcome weights, rewards in
/// `{0, 0.5, 1}` and a random embedding in `[-1, 1]^S`. Regenerates until
/// non-degenerate.
pub fn make_random_mdp(seed: u64, num_states: usize, num_actions: usize, branching: usize) -> Result<FiniteMdp> {
    if num_states == 0 || num_actions == 0 || branching == 0 {
        return Err(Error::Validation("sizes and branching must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_MDP_RETRIES {
        let mut outcomes = Vec::with_capacity(num_states);
        for _ in 0..num_states {
            let mut per_action = Vec::with_capacity(num_actions);
            for _ in 0..num_actions {
                let weights: Vec<f64> = (0..branching).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let total: f64 = weights.iter().sum();
                let mut row: Vec<Outcome> = weights
                    .iter()
                    .map(|w| Outcome {
                        next: rng.gen_range(0..num_states),
                        reward: RANDOM_REWARDS[rng.gen_range(0..RANDOM_REWARDS.len())],
                        prob: w / total,
                    })
                    .collect();
                // absorb rounding so the row sums to one
                let rest: f64 = row[1..].iter().map(|o| o.prob).sum();
                row[0].prob = 1.0 - rest;
                per_action.push(row);
            }
            outcomes.push(per_action);
        }
        let mut rho0: Vec<f64> = (0..num_states).map(|_| rng.gen::<f64>() + 0.1).collect();
        let total: f64 = rho0.iter().sum();
        rho0.iter_mut().for_each(|p| *p /= total);
        let rest: f64 = rho0[1..].iter().sum();
        rho0[0] = 1.0 - rest;
        let embedding: Vec<StateVec> = (0..num_states)
            .map(|_| StateVec::new((0..num_states).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect::<Result<_>>()?;
        match FiniteMdp::new(rho0, outcomes, embedding) {
            Ok(m) if !m.is_degenerate() => return Ok(m),
            _ => continue,
        }
    }
    Err(Error::RetryBudget(RANDOM_MDP_RETRIES))
}

/// Finite-horizon optimal values and greedy policy.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    /// `values[t][s]`: optimal return over the remaining `horizon - t` steps.
    pub values: Vec<Vec<f64>>,
    /// `policy[t][s]`, lowest action index on ties.
    pub policy: Vec<Vec<usize>>,
}

impl ValueTable {
    /// Expected optimal return from the initial distribution.
    pub fn initial_value(&self, mdp: &FiniteMdp) -> f64 {
        mdp.rho0().iter().zip(&self.values[0]).map(|(p, v)| p * v).sum()
    }
}

pub fn value_iteration(mdp: &FiniteMdp, horizon: usize) -> Result<ValueTable> {
    if horizon == 0 {
        return Err(Error::Validation("horizon must be at least 1".into()));
    }
    let n = mdp.num_states();
    let mut values = vec![vec![0.0; n]; horizon + 1];
    let mut policy = vec![vec![0; n]; horizon];
    for t in (0..horizon).rev() {
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..mdp.num_actions() {
                let q: f64 = mdp
                    .outcomes(s, a)
                    .iter()
                    .map(|o| o.prob * (o.reward + values[t + 1][o.next]))
                    .sum();
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            values[t][s] = best;
            policy[t][s] = best_a;
        }
    }
    Ok(ValueTable { values, policy })
}

/// A [`FiniteMdp`] run as an episodic environment truncated at `horizon`.
#[derive(Clone, Debug)]
pub struct TabularEnv {
    mdp: Arc<FiniteMdp>,
    horizon: usize,
    rng: ChaCha8Rng,
    state: Option<usize>,
    t: usize,
    done: bool,
}

fn sample(rng: &mut ChaCha8Rng, probs: impl Iterator<Item = f64>, len: usize) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    len - 1
}

impl TabularEnv {
    pub fn new(mdp: Arc<FiniteMdp>, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Validation("horizon must be at least 1".into()));
        }
        Ok(TabularEnv {
            mdp,
            horizon,
            rng: ChaCha8Rng::seed_from_u64(0),
            state: None,
            t: 0,
            done: false,
        })
    }

    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }

    /// Current tabular state index.
    pub fn state(&self) -> Option<usize> {
        self.state
    }
}

impl Environment for TabularEnv {
    fn reset(&mut self, seed: u64) -> Result<StateVec> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let rho0 = self.mdp.rho0();
        let s = sample(&mut self.rng, rho0.iter().copied(), rho0.len());
        self.state = Some(s);
        self.t = 0;
        self.done = false;
        Ok(self.mdp.embed(s).clone())
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        let s = self.state.ok_or(Error::NotReset)?;
        if self.done {
            return Err(Error::EpisodeOver);
        }
        if action >= self.mdp.num_actions() {
            return Err(Error::InvalidAction {
                action,
                num_actions: self.mdp.num_actions(),
            });
        }
        let row = self.mdp.outcomes(s, action);
        let o = row[sample(&mut self.rng, row.iter().map(|o| o.prob), row.len())];
        self.state = Some(o.next);
        self.t += 1;
        let truncated = self.t >= self.horizon;
        self.done = truncated;
        Ok(Step {
            observation: self.mdp.embed(o.next).clone(),
            reward: o.reward,
            terminated: false,
            truncated,
        })
    }

    fn observation_dim(&self) -> usize {
        self.mdp.dim()
    }

    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }
}
