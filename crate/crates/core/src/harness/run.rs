//! Run orchestration: builds approximators and environments from a config,
//! dispatches to DQN or the A3C ensemble and streams metrics to CSV.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::a3c::{self, EpisodeRecord};
use crate::approximator::QuantumApproximator;
use crate::dqn::{self, EpisodeStats};
use crate::envs::{self, Environment};
use crate::error::{Error, Result};
use crate::harness::config::{Algorithm, ExperimentConfig};
use crate::harness::metrics::{CsvLog, RunRecord, A3C_HEADER, DQN_HEADER};
use crate::rng;

/// Quantum approximator with `n_outputs` logits, with a linear front layer
/// for grid observations.
pub fn build_approximator(config: &ExperimentConfig, n_outputs: usize) -> Result<QuantumApproximator> {
    let qc = config.model.to_config(n_outputs);
    if config.env.needs_linear_layer() {
        QuantumApproximator::with_linear(qc, envs::GRID_OBS_DIM)
    } else {
        QuantumApproximator::new(qc)
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Paths of the metrics CSV and summary written for `config`.
pub fn output_paths(config: &ExperimentConfig) -> (PathBuf, PathBuf) {
    let stem = config.run_name();
    (config.out_dir.join(format!("{stem}.csv")), config.out_dir.join(format!("{stem}.toml")))
}

/// Runs one experiment, writing `<out_dir>/<run_name>.csv` row by row and a
/// summary sidecar at the end.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", config.out_dir.display())))?;
    let (csv_path, summary_path) = output_paths(config);
    let started = Instant::now();
    let kind = config.env;
    let n_qubits = config.model.qubits;
    let preprocess = move |o: &[f64]| envs::preprocess(o, kind, n_qubits);
    let context = |e: Error| match e {
        Error::Numeric(m) => Error::Numeric(format!("{}: {m}", config.run_name())),
        other => other,
    };

    let (header, rows) = match config.algorithm {
        Algorithm::Dqn => {
            let mut log = CsvLog::create(&csv_path, &DQN_HEADER)?;
            let approx = build_approximator(config, kind.n_actions())?;
            let mut env = kind.make(rng::derive_seed(config.seed, "env"))?;
            let mut rows = Vec::with_capacity(config.episodes);
            let mut sink = |s: &EpisodeStats| -> Result<()> {
                let row = vec![s.episode as f64, s.reward, s.epsilon, s.mean_loss];
                log.row(&row.iter().map(|v| fmt(*v)).collect::<Vec<_>>())?;
                rows.push(row);
                Ok(())
            };
            dqn::run_dqn(&config.dqn_config(), approx, env.as_mut(), &preprocess, config.seed, &mut sink)
                .map_err(context)?;
            (DQN_HEADER.to_vec(), rows)
        }
        Algorithm::A3c => {
            let mut log = CsvLog::create(&csv_path, &A3C_HEADER)?;
            let actor = build_approximator(config, kind.n_actions())?;
            let critic = build_approximator(config, 1)?;
            let seed = config.seed;
            let make_env = move |w: usize| -> Result<Box<dyn Environment>> {
                kind.make(rng::derive_seed(seed, &format!("env-{w}")))
            };
            let mut rows = Vec::with_capacity(config.episodes);
            let mut sink = |r: &EpisodeRecord| -> Result<()> {
                let row = vec![r.global_episode as f64, r.worker as f64, r.reward];
                log.row(&row.iter().map(|v| fmt(*v)).collect::<Vec<_>>())?;
                rows.push(row);
                Ok(())
            };
            a3c::run_a3c(&config.a3c_config(), &actor, &critic, &make_env, &preprocess, seed, &mut sink)
                .map_err(context)?;
            (A3C_HEADER.to_vec(), rows)
        }
    };
    let record = RunRecord {
        label: config.run_name(),
        header: header.iter().map(|h| h.to_string()).collect(),
        rows,
        config: Some(config.clone()),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        duration_secs: started.elapsed().as_secs_f64(),
    };
    record.write_summary(&summary_path)?;
    Ok(record)
}

/// Cartesian sweep over seeds and (optionally) model modes. Rotation-only
/// variants drop the locality; other modes keep the configured one.
pub fn sweep(base: &ExperimentConfig, seeds: &[u64], modes: &[crate::qmodel::Mode]) -> Result<Vec<RunRecord>> {
    let modes: Vec<_> = if modes.is_empty() { vec![base.model.mode] } else { modes.to_vec() };
    let mut out = Vec::new();
    for &mode in &modes {
        for &seed in seeds {
            let mut c = base.clone();
            c.seed = seed;
            c.model.mode = mode;
            if mode == crate::qmodel::Mode::RotationOnly {
                c.model.locality = None;
            } else if c.model.locality.is_none() {
                c.model.locality = Some(c.model.qubits.min(3));
            }
            out.push(run_experiment(&c)?);
        }
    }
    Ok(out)
}

/// Loads every CSV in `paths` as a record.
pub fn load_records(paths: &[impl AsRef<Path>]) -> Result<Vec<RunRecord>> {
    paths.iter().map(|p| RunRecord::from_csv(p.as_ref())).collect()
}

