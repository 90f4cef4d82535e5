//! Variational quantum circuits with adaptive non-local observables as
//! function approximators for deep Q-learning and asynchronous actor-critic.

pub mod a3c;
pub mod approximator;
pub mod classical;
pub mod dqn;
pub mod eigen;
pub mod envs;
pub mod error;
pub mod grad;
pub mod harness;
pub mod observable;
pub mod params;
pub mod qmodel;
pub mod qstate;
pub mod rng;

pub use error::{Error, Result};
