//! Random and windowed tabular Q-learning agents with a seeded evaluation
//! harness.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregators::FunctorSpec;
use crate::envs::{EnvId, Environment, ValueTable};
use crate::error::{Error, Result};
use crate::process::{FiniteMdp, StateVec};

/// Padding bin for window slots before the first observation.
pub const SENTINEL: i64 = i64::MIN;
const EXACT_SCALE: f64 = 1e6;

/// Per-dimension discretization of observations into integer bins.
#[derive(Clone, Debug, PartialEq)]
pub enum Discretizer {
    /// Rounds to 1e-6; one-hot and small-integer observations pass through
    /// unchanged.
    Exact,
    /// `bins` equal cells per dimension over `[lo, hi]`; values outside are
    /// clamped to the edge cells.
    Uniform { bins: usize, lo: Vec<f64>, hi: Vec<f64> },
}

impl Discretizer {
    pub fn uniform(bins: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if bins == 0 || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::Validation(
                "uniform discretizer needs bins >= 1 and lo < hi per dimension".into(),
            ));
        }
        Ok(Discretizer::Uniform { bins, lo, hi })
    }

    pub fn discretize(&self, obs: &StateVec, out: &mut Vec<i64>) {
        match self {
            Discretizer::Exact => out.extend(obs.as_slice().iter().map(|x| (x * EXACT_SCALE).round() as i64)),
            Discretizer::Uniform { bins, lo, hi } => {
                for (i, x) in obs.as_slice().iter().enumerate() {
                    let (l, h) = (lo[i % lo.len()], hi[i % hi.len()]);
                    let cell = ((x - l) / (h - l) * *bins as f64).floor();
                    out.push(cell.clamp(0.0, (*bins - 1) as f64) as i64);
                }
            }
        }
    }

    /// Default for an environment seen through `spec`: exact keys for
    /// tabular processes unless `bins` is given, otherwise uniform bins over
    /// the base observation ranges widened by [`range_scale`].
    pub fn for_env(env: &EnvId, spec: &FunctorSpec, bins: Option<usize>) -> Result<Self> {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match env {
            EnvId::CartPole => (vec![-2.4, -3.0, -0.21, -3.5], vec![2.4, 3.0, 0.21, 3.5]),
            EnvId::Pendulum => (vec![-1.0, -1.0, -8.0], vec![1.0, 1.0, 8.0]),
            _ => {
                let Some(bins) = bins else {
                    return Ok(Discretizer::Exact);
                };
                let mdp = env.finite_mdp()?.expect("tabular id");
                let (lo, hi) = embedding_box(&mdp);
                return scaled(bins, lo, hi, range_scale(spec));
            }
        };
        scaled(bins.unwrap_or(DEFAULT_BINS), lo, hi, range_scale(spec))
    }
}

/// Bins per dimension for continuous observations.
pub const DEFAULT_BINS: usize = 8;

fn scaled(bins: usize, lo: Vec<f64>, hi: Vec<f64>, scale: f64) -> Result<Discretizer> {
    Discretizer::uniform(
        bins,
        lo.iter().map(|x| x * scale).collect(),
        hi.iter().map(|x| x * scale).collect(),
    )
}

fn embedding_box(mdp: &FiniteMdp) -> (Vec<f64>, Vec<f64>) {
    let dim = mdp.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for v in mdp.embedding() {
        for (i, x) in v.as_slice().iter().enumerate() {
            lo[i] = lo[i].min(*x);
            hi[i] = hi[i].max(*x);
        }
    }
    for i in 0..dim {
        if lo[i] == hi[i] {
            hi[i] = lo[i] + 1.0;
        }
    }
    (lo, hi)
}

/// How much wider than the base ranges aggregated observations may be:
/// `n + 1` for `G^n`, otherwise `1 + Σ_{1≤τ<8} |w_τ|` of the effective kernel.
pub fn range_scale(spec: &FunctorSpec) -> f64 {
    if let Some(n) = spec.group_power() {
        return f64::from(n) + 1.0;
    }
    match spec.effective_kernel(8) {
        Some(w) => w.iter().map(|x| x.abs()).sum::<f64>() / w[0].abs(),
        None => 1.0,
    }
}

/// Something that picks actions from a stream of observations.
pub trait Policy: Send {
    fn num_actions(&self) -> usize;
    /// Called with the first observation of an episode.
    fn start(&mut self, obs: &StateVec);
    fn act(&mut self, rng: &mut ChaCha8Rng) -> usize;
    /// Called with each subsequent observation.
    fn observe(&mut self, obs: &StateVec);
}

/// Uniformly random actions.
#[derive(Clone, Debug)]
pub struct RandomAgent {
    num_actions: usize,
}

impl RandomAgent {
    pub fn new(num_actions: usize) -> Self {
        RandomAgent { num_actions }
    }
}

impl Policy for RandomAgent {
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn start(&mut self, _obs: &StateVec) {}
    fn act(&mut self, rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(0..self.num_actions)
    }
    fn observe(&mut self, _obs: &StateVec) {}
}

/// Greedy policy read from a value-iteration table, for tabular envs whose
/// observations are the raw embedding.
#[derive(Clone, Debug)]
pub struct TablePolicy {
    mdp: FiniteMdp,
    table: ValueTable,
    state: usize,
    t: usize,
}

impl TablePolicy {
    pub fn new(mdp: FiniteMdp, table: ValueTable) -> Self {
        TablePolicy {
            mdp,
            table,
            state: 0,
            t: 0,
        }
    }

    fn locate(&mut self, obs: &StateVec) {
        self.state = self.mdp.identify(obs).expect("observation is an embedded state");
    }
}

impl Policy for TablePolicy {
    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }
    fn start(&mut self, obs: &StateVec) {
        self.t = 0;
        self.locate(obs);
    }
    fn act(&mut self, _rng: &mut ChaCha8Rng) -> usize {
        let t = self.t.min(self.table.policy.len() - 1);
        self.table.policy[t][self.state]
    }
    fn observe(&mut self, obs: &StateVec) {
        self.t += 1;
        self.locate(obs);
    }
}

/// Hyperparameters of [`WindowedQAgent`].
#[derive(Clone, Debug, PartialEq)]
pub struct QConfig {
    pub window: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the training episodes over which ε decays linearly.
    pub decay_fraction: f64,
}

impl QConfig {
    pub fn new(window: usize) -> Self {
        QConfig {
            window,
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            decay_fraction: 0.8,
        }
    }

    fn epsilon(&self, episode: usize, episodes: usize) -> f64 {
        let span = (self.decay_fraction * episodes as f64).max(1.0);
        let frac = (episode as f64 / span).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Tabular Q-learning on keys made of the last `k` discretized
/// observations.
#[derive(Clone, Debug)]
pub struct WindowedQAgent {
    config: QConfig,
    discretizer: Discretizer,
    num_actions: usize,
    q: HashMap<Vec<i64>, Vec<f64>>,
    window: VecDeque<Vec<i64>>,
}

impl WindowedQAgent {
    pub fn new(config: QConfig, discretizer: Discretizer, num_actions: usize) -> Result<Self> {
        if config.window == 0 {
            return Err(Error::Validation("window must be at least 1".into()));
        }
        if num_actions == 0 {
            return Err(Error::Validation("agent needs at least one action".into()));
        }
        Ok(WindowedQAgent {
            config,
            discretizer,
            num_actions,
            q: HashMap::new(),
            window: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &QConfig {
        &self.config
    }

    pub fn q_table(&self) -> &HashMap<Vec<i64>, Vec<f64>> {
        &self.q
    }

    /// The current window key: oldest slot first, padded with
    /// [`SENTINEL`] slots of the observation width.
    pub fn key(&self) -> Vec<i64> {
        let width = self.window.back().map_or(0, Vec::len);
        let mut key = Vec::with_capacity(width * self.config.window);
        for _ in self.window.len()..self.config.window {
            key.extend(std::iter::repeat_n(SENTINEL, width));
        }
        for slot in &self.window {
            key.extend_from_slice(slot);
        }
        key
    }

    fn push(&mut self, obs: &StateVec) {
        let mut slot = Vec::with_capacity(obs.dim());
        self.discretizer.discretize(obs, &mut slot);
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        self.window.push_back(slot);
    }

    /// Lowest-index maximizer; unseen keys act 0.
    pub fn greedy(&self, key: &[i64]) -> usize {
        let Some(values) = self.q.get(key) else {
            return 0;
        };
        let mut best = 0;
        for (a, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = a;
            }
        }
        best
    }

    fn max_q(&self, key: &[i64]) -> f64 {
        self.q
            .get(key)
            .map_or(0.0, |v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn train(&mut self, env: &mut dyn Environment, episodes: usize, seed: u64) -> Result<()> {
        if episodes == 0 {
            return Err(Error::Validation("episodes must be at least 1".into()));
        }
        if env.num_actions() != self.num_actions {
            return Err(Error::Validation(format!(
                "agent has {} actions, environment has {}",
                self.num_actions,
                env.num_actions()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for episode in 0..episodes {
            let eps = self.config.epsilon(episode, episodes);
            let obs = env.reset(rng.gen())?;
            self.start(&obs);
            loop {
                let key = self.key();
                let action = if rng.gen::<f64>() < eps {
                    rng.gen_range(0..self.num_actions)
                } else {
                    self.greedy(&key)
                };
                let step = env.step(action)?;
                self.push(&step.observation);
                let next = self.key();
                let target = if step.terminated {
                    step.reward
                } else {
                    step.reward + self.config.gamma * self.max_q(&next)
                };
                let alpha = self.config.alpha;
                let q = self.q.entry(key).or_insert_with(|| vec![0.0; self.num_actions]);
                q[action] += alpha * (target - q[action]);
                if step.done() {
                    break;
                }
            }
        }
        Ok(())
    }
}

impl Policy for WindowedQAgent {
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn start(&mut self, obs: &StateVec) {
        self.window.clear();
        self.push(obs);
    }
    fn act(&mut self, _rng: &mut ChaCha8Rng) -> usize {
        self.greedy(&self.key())
    }
    fn observe(&mut self, obs: &StateVec) {
        self.push(obs);
    }
}

/// `random` or `qwin:k[:bins]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentSpec {
    Random,
    QWin { window: usize, bins: Option<usize> },
}

impl FromStr for AgentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::spec(s, msg);
        let int = |x: &str| x.parse::<usize>().ok().filter(|&v| v >= 1);
        match s.split(':').collect::<Vec<_>>().as_slice() {
            ["random"] => Ok(AgentSpec::Random),
            ["qwin", k, rest @ ..] if rest.len() <= 1 => {
                let window = int(k).ok_or_else(|| bad("window must be a positive integer"))?;
                let bins = match rest {
                    [b] => Some(int(b).ok_or_else(|| bad("bins must be a positive integer"))?),
                    _ => None,
                };
                Ok(AgentSpec::QWin { window, bins })
            }
            _ => Err(bad("expected `random` or `qwin:k[:bins]`")),
        }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Random => write!(f, "random"),
            AgentSpec::QWin { window, bins: None } => write!(f, "qwin:{window}"),
            AgentSpec::QWin { window, bins: Some(b) } => write!(f, "qwin:{window}:{b}"),
        }
    }
}

/// Mean, population standard deviation and per-episode returns.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

impl Evaluation {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Evaluation {
            mean,
            std: var.sqrt(),
            returns,
        }
    }
}

/// Runs `episodes` rollouts of `policy`, each cut at `horizon` steps if the
/// environment has not ended it first. Episode `i` resets with seed
/// `seed + i`.
pub fn evaluate(
    policy: &mut dyn Policy,
    env: &mut dyn Environment,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Evaluation> {
    if episodes == 0 {
        return Err(Error::Validation("episodes must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let obs = env.reset(seed.wrapping_add(i as u64))?;
        policy.start(&obs);
        let mut total = 0.0;
        for _ in 0..horizon {
            let step = env.step(policy.act(&mut rng))?;
            total += step.reward;
            if step.done() {
                break;
            }
            policy.observe(&step.observation);
        }
        returns.push(total);
    }
    Ok(Evaluation::from_returns(returns))
}

/// Builds an untrained agent for `env` seen through `spec`.
pub fn build_agent(
    agent: &AgentSpec,
    env: &EnvId,
    spec: &FunctorSpec,
    num_actions: usize,
) -> Result<Box<dyn TrainablePolicy>> {
    Ok(match agent {
        AgentSpec::Random => Box::new(RandomAgent::new(num_actions)),
        AgentSpec::QWin { window, bins } => Box::new(WindowedQAgent::new(
            QConfig::new(*window),
            Discretizer::for_env(env, spec, *bins)?,
            num_actions,
        )?),
    })
}

/// A policy that may learn from interaction. Random agents ignore training.
pub trait TrainablePolicy: Policy {
    fn train(&mut self, env: &mut dyn Environment, episodes: usize, seed: u64) -> Result<()>;
}

impl TrainablePolicy for RandomAgent {
    fn train(&mut self, _env: &mut dyn Environment, episodes: usize, _seed: u64) -> Result<()> {
        if episodes == 0 {
            return Err(Error::Validation("episodes must be at least 1".into()));
        }
        Ok(())
    }
}

impl TrainablePolicy for WindowedQAgent {
    fn train(&mut self, env: &mut dyn Environment, episodes: usize, seed: u64) -> Result<()> {
        WindowedQAgent::train(self, env, episodes, seed)
    }
}
