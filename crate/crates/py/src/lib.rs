//! Python bindings: the quantum model, its gradients, the environments and
//! the experiment harness.

use anoqrl::envs::{self, EnvKind, Environment};
use anoqrl::grad;
use anoqrl::observable::{self, AnoObservable, HermitianParams};
use anoqrl::qmodel::{Mode, QModel, QModelConfig, ThetaParams};
use anoqrl::qstate::StateVector;
use anoqrl::{harness, Error};
use num_complex::Complex64;
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Validation(errs) => PyValueError::new_err(errs.join("; ")),
        Error::Index(m) => PyIndexError::new_err(m),
        e @ (Error::Config(_) | Error::Usage(_)) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_mode(s: &str) -> PyResult<Mode> {
    Mode::parse(s).ok_or_else(|| PyValueError::new_err(format!("unknown mode {s:?}")))
}

fn parse_env(name: &str, side: usize) -> PyResult<EnvKind> {
    match name {
        "cartpole" => Ok(EnvKind::CartPole),
        "mountaincar" => Ok(EnvKind::MountainCar),
        "minigrid" | "minigrid8x8" => Ok(EnvKind::MiniGrid { side }),
        "simplecrossing" => Ok(EnvKind::SimpleCrossing),
        other => Err(PyValueError::new_err(format!("unknown environment {other:?}"))),
    }
}

type GradTriple = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

/// Variational circuit with its parameters.
#[pyclass(name = "Model")]
struct PyModel {
    model: QModel,
    theta: ThetaParams,
    ano: Option<AnoObservable>,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (n_qubits, n_layers=1, locality=None, mode="ano_with_rotation", n_outputs=None, seed=0))]
    fn new(
        n_qubits: usize,
        n_layers: usize,
        locality: Option<usize>,
        mode: &str,
        n_outputs: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let mode = parse_mode(mode)?;
        let config = QModelConfig {
            n_qubits,
            n_layers,
            locality: locality.unwrap_or(1),
            mode,
            n_outputs: n_outputs.unwrap_or(n_qubits),
        };
        let model = QModel::new(config).map_err(to_py)?;
        let (theta, ano) = model.init_params(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self { model, theta, ano })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.model.config().n_qubits
    }

    #[getter]
    fn n_outputs(&self) -> usize {
        self.model.config().n_outputs
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.model.config().mode.as_str()
    }

    /// Qubit windows read by each observable, empty for Pauli-Z readout.
    #[getter]
    fn groups(&self) -> Vec<Vec<usize>> {
        self.model.scheme().map(|s| s.groups().to_vec()).unwrap_or_default()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.theta.angles.clone()
    }

    #[setter]
    fn set_theta(&mut self, angles: Vec<f64>) -> PyResult<()> {
        self.theta = ThetaParams::from_flat(self.theta.n_layers, self.theta.n_qubits, angles).map_err(to_py)?;
        Ok(())
    }

    /// Flat observable parameters `[diag, upper_re, upper_im]` per group.
    #[getter]
    fn phi(&self) -> Vec<Vec<f64>> {
        self.ano.as_ref().map(|a| a.per_group().iter().map(|h| h.to_flat()).collect()).unwrap_or_default()
    }

    #[setter]
    fn set_phi(&mut self, flat: Vec<Vec<f64>>) -> PyResult<()> {
        let Some(ano) = &self.ano else {
            return Err(PyValueError::new_err("this mode has no adaptive observables"));
        };
        let per = flat
            .iter()
            .map(|f| HermitianParams::from_flat(ano.scheme().k_local(), f))
            .collect::<anoqrl::Result<Vec<_>>>()
            .map_err(to_py)?;
        self.ano = Some(AnoObservable::new(ano.scheme().clone(), per).map_err(to_py)?);
        Ok(())
    }

    fn forward(&self, features: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.model.forward(&self.theta, self.ano.as_ref(), &features).map_err(to_py)?.logits)
    }

    /// Gradients of `sum_o weights[o] * logit_o` as `(d_theta, d_phi, d_features)`.
    fn gradients(&self, features: Vec<f64>, weights: Vec<f64>) -> PyResult<GradTriple> {
        let g = grad::gradients(&self.model, &self.theta, self.ano.as_ref(), &features, &weights).map_err(to_py)?;
        Ok((g.d_theta, g.d_phi.iter().map(|h| h.to_flat()).collect(), g.d_features))
    }

    fn __repr__(&self) -> String {
        let c = self.model.config();
        format!(
            "Model(n_qubits={}, n_layers={}, locality={}, mode={:?}, n_outputs={})",
            c.n_qubits,
            c.n_layers,
            c.locality,
            c.mode.as_str(),
            c.n_outputs
        )
    }
}

/// One of the built-in environments.
#[pyclass(name = "Env", unsendable)]
struct PyEnv {
    kind: EnvKind,
    env: Box<dyn Environment>,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (name, seed, grid_size=8))]
    fn new(name: &str, seed: u64, grid_size: usize) -> PyResult<Self> {
        let kind = parse_env(name, grid_size)?;
        Ok(Self { kind, env: kind.make(seed).map_err(to_py)? })
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.env.n_actions()
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.kind.name()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.env.reset()
    }

    /// Returns `(obs, reward, done, truncated)`.
    fn step(&mut self, action: usize) -> PyResult<(Vec<f64>, f64, bool, bool)> {
        let s = self.env.step(action).map_err(to_py)?;
        Ok((s.obs, s.reward, s.done, s.truncated))
    }

    /// Encoding angles for an `n_qubits` model.
    fn preprocess(&self, obs: Vec<f64>, n_qubits: usize) -> PyResult<Vec<f64>> {
        envs::preprocess(&obs, self.kind, n_qubits).map_err(to_py)
    }
}

/// `<H>` of a `k`-local observable on `group` of a normalized state.
#[pyfunction]
fn expectation(amplitudes: Vec<Complex64>, group: Vec<usize>, flat: Vec<f64>) -> PyResult<f64> {
    let sv = StateVector::from_amplitudes(amplitudes).map_err(to_py)?;
    let hp = HermitianParams::from_flat(group.len(), &flat).map_err(to_py)?;
    observable::expectation(&sv, &group, &hp).map_err(to_py)
}

/// Ascending eigenvalues of a `k`-local observable.
#[pyfunction]
fn spectrum(k_local: usize, flat: Vec<f64>) -> PyResult<Vec<f64>> {
    HermitianParams::from_flat(k_local, &flat).and_then(|h| h.spectrum()).map_err(to_py)
}

/// Trailing moving average and sample standard deviation.
#[pyfunction]
#[pyo3(signature = (series, window=100))]
fn moving_average(series: Vec<f64>, window: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = harness::moving_average(&series, window).map_err(to_py)?;
    Ok((s.mean, s.std))
}

/// Discounted n-step returns and advantages.
#[pyfunction]
fn n_step_returns(rewards: Vec<f64>, values: Vec<f64>, bootstrap: f64, gamma: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    anoqrl::a3c::n_step_returns(&rewards, &values, bootstrap, gamma).map_err(to_py)
}

/// Parses a TOML experiment document and returns it normalized.
#[pyfunction]
fn validate_config(text: &str) -> PyResult<String> {
    harness::parse_config(text).map(|c| harness::render_config(&c)).map_err(to_py)
}

/// Runs an experiment described by a TOML document. Returns the CSV header
/// and rows; the CSV and summary files are written to the configured
/// output directory as well.
#[pyfunction]
fn run_experiment(py: Python<'_>, text: &str) -> PyResult<(Vec<String>, Vec<Vec<f64>>)> {
    let config = harness::parse_config(text).map_err(to_py)?;
    let record = py.detach(|| harness::run_experiment(&config)).map_err(to_py)?;
    Ok((record.header, record.rows))
}

#[pymodule]
pub fn anoqrl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyEnv>()?;
    m.add_function(wrap_pyfunction!(expectation, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(moving_average, m)?)?;
    m.add_function(wrap_pyfunction!(n_step_returns, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
