use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::{Environment, Step};
use crate::error::{Error, Result};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const MAX_STEPS: usize = 200;

/// Under-powered car in a valley. Observation `(position, velocity)`;
/// actions 0 = push left, 1 = no push, 2 = push right; reward -1 per step.
#[derive(Debug, Clone)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl MountainCar {
    pub fn new(seed: u64) -> Self {
        Self { position: -0.5, velocity: 0.0, steps: 0, done: true, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
        self.done = false;
    }

    pub fn dynamics(position: f64, velocity: f64, action: usize) -> (f64, f64) {
        let push = action as f64 - 1.0;
        let mut v = (velocity + FORCE * push - GRAVITY * (3.0 * position).cos()).clamp(-MAX_SPEED, MAX_SPEED);
        let x = (position + v).clamp(MIN_POSITION, MAX_POSITION);
        if x == MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        (x, v)
    }
}

impl Environment for MountainCar {
    fn n_actions(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn reset(&mut self) -> Vec<f64> {
        let u = Uniform::new(-0.6, -0.4).expect("valid range");
        let p = u.sample(&mut self.rng);
        self.set_state(p, 0.0);
        vec![p, 0.0]
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::Usage("mountaincar episode is over; call reset".into()));
        }
        if action > 2 {
            return Err(Error::Index(format!("mountaincar action {action} not in {{0, 1, 2}}")));
        }
        let (x, v) = Self::dynamics(self.position, self.velocity, action);
        self.position = x;
        self.velocity = v;
        self.steps += 1;
        let reached = x >= GOAL_POSITION;
        let capped = !reached && self.steps >= MAX_STEPS;
        self.done = reached || capped;
        Ok(Step { obs: vec![x, v], reward: -1.0, done: self.done, truncated: capped })
    }
}
