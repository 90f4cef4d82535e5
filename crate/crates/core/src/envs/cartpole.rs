use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::{Environment, Step};
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const FORCE: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const MAX_STEPS: usize = 500;

/// Cart-pole balancing with explicit Euler integration. Observation
/// `(x, x_dot, theta, theta_dot)`; action 0 pushes left, 1 pushes right.
#[derive(Debug, Clone)]
pub struct CartPole {
    state: [f64; 4],
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl CartPole {
    pub fn new(seed: u64) -> Self {
        Self { state: [0.0; 4], steps: 0, done: true, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Places the system in `state` with a fresh step counter.
    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.steps = 0;
        self.done = false;
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    /// One Euler step of the cart-pole equations of motion.
    pub fn dynamics(state: [f64; 4], action: usize) -> [f64; 4] {
        let [x, x_dot, theta, theta_dot] = state;
        let force = if action == 1 { FORCE } else { -FORCE };
        let total_mass = CART_MASS + POLE_MASS;
        let pole_ml = POLE_MASS * HALF_LENGTH;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + pole_ml * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc =
            (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
        let x_acc = temp - pole_ml * theta_acc * cos / total_mass;
        [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ]
    }
}

impl Environment for CartPole {
    fn n_actions(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn reset(&mut self) -> Vec<f64> {
        let u = Uniform::new_inclusive(-0.05, 0.05).expect("valid range");
        let s = [u.sample(&mut self.rng), u.sample(&mut self.rng), u.sample(&mut self.rng), u.sample(&mut self.rng)];
        self.set_state(s);
        s.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::Usage("cartpole episode is over; call reset".into()));
        }
        if action > 1 {
            return Err(Error::Index(format!("cartpole action {action} not in {{0, 1}}")));
        }
        self.state = Self::dynamics(self.state, action);
        self.steps += 1;
        let failed = self.state[0].abs() > X_THRESHOLD || self.state[2].abs() > THETA_THRESHOLD;
        let capped = !failed && self.steps >= MAX_STEPS;
        self.done = failed || capped;
        Ok(Step { obs: self.state.to_vec(), reward: 1.0, done: self.done, truncated: capped })
    }
}
