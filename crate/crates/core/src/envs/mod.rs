//! Benchmark environments and their feature preprocessing.

pub mod cartpole;
pub mod grid;
pub mod mountaincar;

pub use cartpole::CartPole;
pub use grid::{Cell, GridWorld, GRID_OBS_DIM};
pub use mountaincar::MountainCar;

use std::f64::consts::FRAC_PI_2;

use crate::error::{self, Result};

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// The episode is over (failure, success or step cap).
    pub done: bool,
    /// The episode ended only because of the step cap.
    pub truncated: bool,
}

impl Step {
    /// Ended by the dynamics; no bootstrapping past this step.
    pub fn terminal(&self) -> bool {
        self.done && !self.truncated
    }
}

/// One `(s, a, r, s', terminal)` record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

pub trait Environment: Send {
    fn n_actions(&self) -> usize;
    fn obs_dim(&self) -> usize;
    /// Starts a new episode and returns the first observation.
    fn reset(&mut self) -> Vec<f64>;
    /// Errors when the current episode is already over.
    fn step(&mut self, action: usize) -> Result<Step>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    CartPole,
    MountainCar,
    /// Empty room with the given side length (border walls included).
    MiniGrid { side: usize },
    /// Nine-cell-wide room split by one wall with a single gap.
    SimpleCrossing,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::MountainCar => "mountaincar",
            EnvKind::MiniGrid { .. } => "minigrid8x8",
            EnvKind::SimpleCrossing => "simplecrossing",
        }
    }

    pub fn n_actions(self) -> usize {
        match self {
            EnvKind::CartPole => 2,
            EnvKind::MountainCar => 3,
            EnvKind::MiniGrid { .. } | EnvKind::SimpleCrossing => 3,
        }
    }

    /// Grid observations go through a trainable linear layer instead of the
    /// fixed angle map.
    pub fn needs_linear_layer(self) -> bool {
        matches!(self, EnvKind::MiniGrid { .. } | EnvKind::SimpleCrossing)
    }

    pub fn make(self, seed: u64) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvKind::CartPole => Box::new(CartPole::new(seed)),
            EnvKind::MountainCar => Box::new(MountainCar::new(seed)),
            EnvKind::MiniGrid { side } => Box::new(GridWorld::empty(side, seed)?),
            EnvKind::SimpleCrossing => Box::new(GridWorld::simple_crossing(seed)),
        })
    }
}

/// Maps a raw observation to model inputs.
///
/// CartPole: positions divided by their termination bound, clamped to
/// `[-1, 1]` and scaled by `pi/2`; velocities through `arctan`.
/// MountainCar: both components scaled by their range to `[-1, 1]` then
/// `pi/2`, tiled to `n_qubits` features. Grid observations pass through
/// unchanged for the linear layer.
pub fn preprocess(obs: &[f64], kind: EnvKind, n_qubits: usize) -> Result<Vec<f64>> {
    let base = match kind {
        EnvKind::CartPole => {
            if obs.len() != 4 {
                return error::config(format!("cartpole observation has {} entries", obs.len()));
            }
            vec![
                (obs[0] / cartpole::X_THRESHOLD).clamp(-1.0, 1.0) * FRAC_PI_2,
                obs[1].atan(),
                (obs[2] / cartpole::THETA_THRESHOLD).clamp(-1.0, 1.0) * FRAC_PI_2,
                obs[3].atan(),
            ]
        }
        EnvKind::MountainCar => {
            if obs.len() != 2 {
                return error::config(format!("mountaincar observation has {} entries", obs.len()));
            }
            let (lo, hi) = (mountaincar::MIN_POSITION, mountaincar::MAX_POSITION);
            let p = (2.0 * (obs[0] - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
            let v = (obs[1] / mountaincar::MAX_SPEED).clamp(-1.0, 1.0);
            vec![p * FRAC_PI_2, v * FRAC_PI_2]
        }
        EnvKind::MiniGrid { .. } | EnvKind::SimpleCrossing => return Ok(obs.to_vec()),
    };
    if n_qubits == 0 || !n_qubits.is_multiple_of(base.len()) {
        return error::config(format!(
            "{} qubits cannot hold whole copies of {} {} features",
            n_qubits,
            base.len(),
            kind.name()
        ));
    }
    Ok(base.iter().copied().cycle().take(n_qubits).collect())
}
