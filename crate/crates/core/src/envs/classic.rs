//! Classic-control tasks with explicit Euler integration.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, Step};
use crate::error::{Error, Result};
use crate::process::StateVec;

pub const CARTPOLE_MAX_STEPS: usize = 500;
pub const PENDULUM_MAX_STEPS: usize = 200;

const GRAVITY: f64 = 9.8;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const TOTAL_MASS: f64 = CART_MASS + POLE_MASS;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = POLE_MASS * HALF_LENGTH;
const FORCE: f64 = 10.0;
const CARTPOLE_DT: f64 = 0.02;
const X_LIMIT: f64 = 2.4;
const THETA_LIMIT: f64 = 12.0 * 2.0 * PI / 360.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Fresh,
    Running,
    Done,
}

fn guard(phase: Phase, action: usize, num_actions: usize) -> Result<()> {
    match phase {
        Phase::Fresh => return Err(Error::NotReset),
        Phase::Done => return Err(Error::EpisodeOver),
        Phase::Running => {}
    }
    if action >= num_actions {
        return Err(Error::InvalidAction { action, num_actions });
    }
    Ok(())
}

/// Cart-pole: observation `(x, ẋ, θ, θ̇)`, actions push left / push right.
#[derive(Clone, Debug)]
pub struct CartPole {
    state: [f64; 4],
    steps: usize,
    phase: Phase,
}

pub fn make_cartpole() -> CartPole {
    CartPole {
        state: [0.0; 4],
        steps: 0,
        phase: Phase::Fresh,
    }
}

impl CartPole {
    fn observe(&self) -> StateVec {
        StateVec::from_raw(self.state.to_vec())
    }
}

impl Environment for CartPole {
    fn reset(&mut self, seed: u64) -> Result<StateVec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in &mut self.state {
            *x = rng.gen_range(-0.05..0.05);
        }
        self.steps = 0;
        self.phase = Phase::Running;
        Ok(self.observe())
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        guard(self.phase, action, 2)?;
        let [x, x_dot, theta, theta_dot] = self.state;
        let force = if action == 1 { FORCE } else { -FORCE };
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
        self.state = [
            x + CARTPOLE_DT * x_dot,
            x_dot + CARTPOLE_DT * x_acc,
            theta + CARTPOLE_DT * theta_dot,
            theta_dot + CARTPOLE_DT * theta_acc,
        ];
        self.steps += 1;
        let terminated = self.state[0].abs() > X_LIMIT || self.state[2].abs() > THETA_LIMIT;
        let truncated = !terminated && self.steps >= CARTPOLE_MAX_STEPS;
        if terminated || truncated {
            self.phase = Phase::Done;
        }
        Ok(Step {
            observation: self.observe(),
            reward: 1.0,
            terminated,
            truncated,
        })
    }

    fn observation_dim(&self) -> usize {
        4
    }

    fn num_actions(&self) -> usize {
        2
    }
}

const PENDULUM_G: f64 = 10.0;
const PENDULUM_MASS: f64 = 1.0;
const PENDULUM_LENGTH: f64 = 1.0;
const PENDULUM_DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
const TORQUES: [f64; 3] = [-2.0, 0.0, 2.0];

/// Pendulum swing-up: observation `(cos θ, sin θ, θ̇)`, torques `{-2, 0, 2}`.
#[derive(Clone, Debug)]
pub struct Pendulum {
    theta: f64,
    theta_dot: f64,
    steps: usize,
    phase: Phase,
}

pub fn make_pendulum() -> Pendulum {
    Pendulum {
        theta: 0.0,
        theta_dot: 0.0,
        steps: 0,
        phase: Phase::Fresh,
    }
}

fn normalize_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Pendulum {
    fn observe(&self) -> StateVec {
        let (sin, cos) = self.theta.sin_cos();
        StateVec::from_raw(vec![cos, sin, self.theta_dot])
    }
}

impl Environment for Pendulum {
    fn reset(&mut self, seed: u64) -> Result<StateVec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.theta = rng.gen_range(-PI..PI);
        self.theta_dot = rng.gen_range(-1.0..1.0);
        self.steps = 0;
        self.phase = Phase::Running;
        Ok(self.observe())
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        guard(self.phase, action, TORQUES.len())?;
        let u = TORQUES[action];
        let angle = normalize_angle(self.theta);
        let reward = -(angle * angle + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);
        let acc = 3.0 * PENDULUM_G / (2.0 * PENDULUM_LENGTH) * self.theta.sin()
            + 3.0 / (PENDULUM_MASS * PENDULUM_LENGTH * PENDULUM_LENGTH) * u;
        let theta_dot = (self.theta_dot + acc * PENDULUM_DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += theta_dot * PENDULUM_DT;
        self.theta_dot = theta_dot;
        self.steps += 1;
        let truncated = self.steps >= PENDULUM_MAX_STEPS;
        if truncated {
            self.phase = Phase::Done;
        }
        Ok(Step {
            observation: self.observe(),
            reward,
            terminated: false,
            truncated,
        })
    }

    fn observation_dim(&self) -> usize {
        3
    }

    fn num_actions(&self) -> usize {
        TORQUES.len()
    }
}
