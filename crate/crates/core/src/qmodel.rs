//! The quantum function approximator: Hadamard + RY angle encoding, a
//! brick-pattern CNOT entangler with RX/RY/RZ rotations per layer, and either
//! an adaptive-observable or a fixed Pauli-Z readout.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{self, Result};
use crate::observable::{self, AnoObservable, GroupingScheme};
use crate::qstate::{Axis, StateVector, MAX_QUBITS};

/// Ablation configuration of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Variational layer plus trainable k-local observables.
    AnoWithRotation,
    /// Variational layer plus fixed Pauli-Z per qubit.
    RotationOnly,
    /// No variational layer; trainable k-local observables only.
    MeasurementOnly,
}

impl Mode {
    pub fn uses_ano(self) -> bool {
        !matches!(self, Mode::RotationOnly)
    }

    pub fn uses_rotations(self) -> bool {
        !matches!(self, Mode::MeasurementOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::AnoWithRotation => "ano_with_rotation",
            Mode::RotationOnly => "rotation_only",
            Mode::MeasurementOnly => "measurement_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ano_with_rotation" => Some(Mode::AnoWithRotation),
            "rotation_only" => Some(Mode::RotationOnly),
            "measurement_only" => Some(Mode::MeasurementOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QModelConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
    /// Observable locality `k`; ignored by `RotationOnly`.
    pub locality: usize,
    pub mode: Mode,
    pub n_outputs: usize,
}

impl QModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return error::config(format!("qubit count {} outside 1..={MAX_QUBITS}", self.n_qubits));
        }
        if self.n_outputs == 0 {
            return error::config("model needs at least one output");
        }
        if self.n_outputs > self.n_qubits {
            return error::config(format!(
                "{} outputs exceed the {} available readouts",
                self.n_outputs, self.n_qubits
            ));
        }
        if self.mode.uses_ano() && (self.locality == 0 || self.locality > self.n_qubits) {
            return error::config(format!(
                "locality exceeds qubit count (k = {}, n = {})",
                self.locality, self.n_qubits
            ));
        }
        Ok(())
    }

    /// Variational depth actually applied (`MeasurementOnly` has none).
    pub fn effective_layers(&self) -> usize {
        if self.mode.uses_rotations() {
            self.n_layers
        } else {
            0
        }
    }

    pub fn n_theta(&self) -> usize {
        self.effective_layers() * self.n_qubits * 3
    }
}

/// Rotation angles, laid out `[layer][qubit][RX, RY, RZ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParams {
    pub n_layers: usize,
    pub n_qubits: usize,
    pub angles: Vec<f64>,
}

impl ThetaParams {
    pub fn zeros(n_layers: usize, n_qubits: usize) -> Self {
        Self { n_layers, n_qubits, angles: vec![0.0; n_layers * n_qubits * 3] }
    }

    /// Uniform in `[-pi, pi)`.
    pub fn random<R: Rng + ?Sized>(n_layers: usize, n_qubits: usize, rng: &mut R) -> Self {
        let u = Uniform::new(-std::f64::consts::PI, std::f64::consts::PI).expect("valid range");
        Self { n_layers, n_qubits, angles: (0..n_layers * n_qubits * 3).map(|_| u.sample(rng)).collect() }
    }

    pub fn from_flat(n_layers: usize, n_qubits: usize, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != n_layers * n_qubits * 3 {
            return error::config(format!(
                "{} rotation angles for {n_layers} layers of {n_qubits} qubits",
                angles.len()
            ));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return error::numeric("non-finite rotation angle");
        }
        Ok(Self { n_layers, n_qubits, angles })
    }

    pub fn index(&self, layer: usize, qubit: usize, axis: usize) -> usize {
        (layer * self.n_qubits + qubit) * 3 + axis
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub logits: Vec<f64>,
}

/// Source of a rotation angle inside a [`Circuit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Theta(usize),
    Feature(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    Rot { qubit: usize, axis: Axis, angle: Angle },
    Cnot { control: usize, target: usize },
}

/// A gate list with symbolic angles, evaluated against `(theta, features)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new() }
    }

    pub fn resolve(angle: Angle, theta: &[f64], features: &[f64]) -> f64 {
        match angle {
            Angle::Fixed(v) => v,
            Angle::Theta(i) => theta[i],
            Angle::Feature(i) => features[i],
        }
    }

    pub fn apply_gate(sv: &mut StateVector, gate: &Gate, theta: &[f64], features: &[f64]) -> Result<()> {
        match *gate {
            Gate::H(q) => sv.apply_hadamard(q),
            Gate::Rot { qubit, axis, angle } => sv.apply_rotation(qubit, axis, Self::resolve(angle, theta, features)),
            Gate::Cnot { control, target } => sv.apply_cnot(control, target),
        }
    }

    pub fn run(&self, theta: &[f64], features: &[f64]) -> Result<StateVector> {
        let mut sv = StateVector::zero_state(self.n_qubits)?;
        for g in &self.gates {
            Self::apply_gate(&mut sv, g, theta, features)?;
        }
        Ok(sv)
    }

    /// Appends the encoding block: H on every qubit, then RY(feature_i).
    pub fn push_encoding(&mut self) {
        for q in 0..self.n_qubits {
            self.gates.push(Gate::H(q));
        }
        for q in 0..self.n_qubits {
            self.gates.push(Gate::Rot { qubit: q, axis: Axis::Y, angle: Angle::Feature(q) });
        }
    }

    /// Appends `n_layers` variational layers: CNOTs on even pairs (0,1),
    /// (2,3), .. then odd pairs (1,2), (3,4), .., followed by RX, RY, RZ on
    /// each qubit.
    pub fn push_variational(&mut self, n_layers: usize) {
        let n = self.n_qubits;
        let shape = ThetaParams::zeros(n_layers, n);
        for layer in 0..n_layers {
            for start in [0, 1] {
                let mut c = start;
                while c + 1 < n {
                    self.gates.push(Gate::Cnot { control: c, target: c + 1 });
                    c += 2;
                }
            }
            for q in 0..n {
                for (a, axis) in [Axis::X, Axis::Y, Axis::Z].into_iter().enumerate() {
                    let angle = Angle::Theta(shape.index(layer, q, a));
                    self.gates.push(Gate::Rot { qubit: q, axis, angle });
                }
            }
        }
    }
}

/// Readout applied to the final state.
#[derive(Debug, Clone, PartialEq)]
pub enum Readout {
    /// `<Z>` on qubits `0..n_outputs`.
    PauliZ,
    /// Group `g`'s adaptive observable for `g in 0..n_outputs`.
    Ano(GroupingScheme),
}

/// A compiled model: circuit plus readout for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct QModel {
    config: QModelConfig,
    circuit: Circuit,
    readout: Readout,
}

impl QModel {
    pub fn new(config: QModelConfig) -> Result<Self> {
        config.validate()?;
        let mut circuit = Circuit::new(config.n_qubits);
        circuit.push_encoding();
        circuit.push_variational(config.effective_layers());
        let readout = if config.mode.uses_ano() {
            Readout::Ano(GroupingScheme::build(config.n_qubits, config.locality)?)
        } else {
            Readout::PauliZ
        };
        Ok(Self { config, circuit, readout })
    }

    /// A model over a hand-built circuit, for fixtures that bypass the
    /// standard encoding.
    pub fn with_circuit(config: QModelConfig, circuit: Circuit) -> Result<Self> {
        config.validate()?;
        if circuit.n_qubits != config.n_qubits {
            return error::config("circuit width differs from configured qubit count");
        }
        let readout = if config.mode.uses_ano() {
            Readout::Ano(GroupingScheme::build(config.n_qubits, config.locality)?)
        } else {
            Readout::PauliZ
        };
        Ok(Self { config, circuit, readout })
    }

    pub fn config(&self) -> &QModelConfig {
        &self.config
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn readout(&self) -> &Readout {
        &self.readout
    }

    pub fn scheme(&self) -> Option<&GroupingScheme> {
        match &self.readout {
            Readout::Ano(s) => Some(s),
            Readout::PauliZ => None,
        }
    }

    pub fn check_inputs(&self, theta: &ThetaParams, ano: Option<&AnoObservable>, features: &[f64]) -> Result<()> {
        let cfg = &self.config;
        if features.len() != cfg.n_qubits {
            return error::config(format!("{} features for {} qubits", features.len(), cfg.n_qubits));
        }
        if theta.angles.len() != cfg.n_theta() {
            return error::config(format!(
                "{} rotation angles, configuration needs {}",
                theta.angles.len(),
                cfg.n_theta()
            ));
        }
        match (&self.readout, ano) {
            (Readout::Ano(scheme), Some(a)) if a.scheme() == scheme => Ok(()),
            (Readout::Ano(_), Some(_)) => error::config("observable grouping does not match the model"),
            (Readout::Ano(_), None) => error::config("mode requires an adaptive observable"),
            (Readout::PauliZ, Some(_)) => error::config("rotation-only mode takes no adaptive observable"),
            (Readout::PauliZ, None) => Ok(()),
        }
    }

    /// Final state `U(theta) W(features) |0>`.
    pub fn state(&self, theta: &[f64], features: &[f64]) -> Result<StateVector> {
        self.circuit.run(theta, features)
    }

    /// Logit `output` read from an already prepared state.
    pub fn read_output(&self, sv: &StateVector, ano: Option<&AnoObservable>, output: usize) -> Result<f64> {
        match &self.readout {
            Readout::PauliZ => sv.expect_z(output),
            Readout::Ano(_) => match ano {
                Some(a) => a.expectation(sv, output),
                None => error::config("mode requires an adaptive observable"),
            },
        }
    }

    /// `sum_o weights[o] * logit_o` on a prepared state.
    pub fn read_weighted(&self, sv: &StateVector, ano: Option<&AnoObservable>, weights: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (o, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                total += w * self.read_output(sv, ano, o)?;
            }
        }
        Ok(total)
    }

    pub fn forward(&self, theta: &ThetaParams, ano: Option<&AnoObservable>, features: &[f64]) -> Result<ModelOutput> {
        self.check_inputs(theta, ano, features)?;
        let sv = self.state(&theta.angles, features)?;
        let logits = (0..self.config.n_outputs)
            .map(|o| self.read_output(&sv, ano, o))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelOutput { logits })
    }

    /// Fresh parameters for this configuration: uniform angles and small
    /// random observables.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> (ThetaParams, Option<AnoObservable>) {
        let theta = ThetaParams::random(self.config.effective_layers(), self.config.n_qubits, rng);
        let ano = self.scheme().map(|s| AnoObservable::random(s.clone(), rng));
        (theta, ano)
    }
}

/// Encoding alone: `W(features)|0>`.
pub fn encode(features: &[f64]) -> Result<StateVector> {
    let mut c = Circuit::new(features.len());
    c.push_encoding();
    c.run(&[], features)
}

/// Applies `n_layers` variational layers to `sv`.
pub fn variational(sv: &StateVector, theta: &ThetaParams) -> Result<StateVector> {
    if theta.n_qubits != sv.n_qubits() || theta.angles.len() != theta.n_layers * theta.n_qubits * 3 {
        return error::config("rotation angles do not match the register");
    }
    let mut c = Circuit::new(sv.n_qubits());
    c.push_variational(theta.n_layers);
    let mut out = sv.clone();
    for g in &c.gates {
        Circuit::apply_gate(&mut out, g, &theta.angles, &[])?;
    }
    Ok(out)
}

/// Expectation of every group observable on `sv` (not only the logits).
pub fn all_group_expectations(sv: &StateVector, ano: &AnoObservable) -> Result<Vec<f64>> {
    ano.scheme()
        .groups()
        .iter()
        .zip(ano.per_group())
        .map(|(g, hp)| observable::expectation(sv, g, hp))
        .collect()
}
