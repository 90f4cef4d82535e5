//! Function approximators as seen by the RL drivers: a parameter layout in a
//! [`ParamStore`], a forward pass over observations, and weighted-logit
//! gradients accumulated into a same-layout store.

use rand::RngCore;

use crate::classical::LinearLayer;
use crate::error::{self, Result};
use crate::grad;
use crate::observable::{self, AnoObservable, HermitianParams};
use crate::params::{BlockKind, ParamStore};
use crate::qmodel::{QModel, QModelConfig, ThetaParams};

pub trait Approximator: Send + Sync {
    /// Typed parameters unpacked once from a store and reused across many
    /// evaluations.
    type Compiled: Send + Sync;

    fn n_outputs(&self) -> usize;

    fn init_params(&self, rng: &mut dyn RngCore) -> ParamStore;

    fn compile(&self, params: &ParamStore) -> Result<Self::Compiled>;

    fn evaluate(&self, compiled: &Self::Compiled, obs: &[f64]) -> Result<Vec<f64>>;

    /// `out += scale * d(sum_o weights[o] * f_o(obs)) / d params`.
    fn accumulate_grad(
        &self,
        compiled: &Self::Compiled,
        obs: &[f64],
        weights: &[f64],
        scale: f64,
        out: &mut ParamStore,
    ) -> Result<()>;
}

pub const THETA_BLOCK: &str = "theta";
pub const LINEAR_BLOCK: &str = "linear";

pub fn phi_block_name(group: usize) -> String {
    format!("phi.{group}")
}

/// The quantum model, optionally preceded by a classical reduction layer
/// mapping raw observations to encoding angles.
#[derive(Debug, Clone)]
pub struct QuantumApproximator {
    model: QModel,
    linear_in: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct QuantumParams {
    pub theta: ThetaParams,
    pub ano: Option<AnoObservable>,
    pub linear: Option<LinearLayer>,
}

impl QuantumApproximator {
    pub fn new(config: QModelConfig) -> Result<Self> {
        Ok(Self { model: QModel::new(config)?, linear_in: None })
    }

    /// Adds a linear layer from `in_dim` raw inputs to one angle per qubit.
    pub fn with_linear(config: QModelConfig, in_dim: usize) -> Result<Self> {
        if in_dim == 0 {
            return error::config("linear layer needs at least one input");
        }
        Ok(Self { model: QModel::new(config)?, linear_in: Some(in_dim) })
    }

    pub fn model(&self) -> &QModel {
        &self.model
    }

    fn features(&self, compiled: &QuantumParams, obs: &[f64]) -> Result<Vec<f64>> {
        match &compiled.linear {
            Some(l) => l.forward(obs),
            None => Ok(obs.to_vec()),
        }
    }
}

impl Approximator for QuantumApproximator {
    type Compiled = QuantumParams;

    fn n_outputs(&self) -> usize {
        self.model.config().n_outputs
    }

    fn init_params(&self, rng: &mut dyn RngCore) -> ParamStore {
        let (theta, ano) = self.model.init_params(rng);
        let mut store = ParamStore::new();
        store.push(THETA_BLOCK, BlockKind::Theta, theta.angles);
        if let Some(ano) = ano {
            for (g, hp) in ano.per_group().iter().enumerate() {
                store.push(phi_block_name(g), BlockKind::Phi, hp.to_flat());
            }
        }
        if let Some(in_dim) = self.linear_in {
            let layer = LinearLayer::random(in_dim, self.model.config().n_qubits, rng);
            store.push(LINEAR_BLOCK, BlockKind::Linear, layer.to_flat());
        }
        store
    }

    fn compile(&self, params: &ParamStore) -> Result<QuantumParams> {
        let cfg = self.model.config();
        let theta = ThetaParams::from_flat(cfg.effective_layers(), cfg.n_qubits, params.require(THETA_BLOCK)?.to_vec())?;
        let ano = match self.model.scheme() {
            Some(scheme) => {
                let per_group = (0..scheme.groups().len())
                    .map(|g| HermitianParams::from_flat(scheme.k_local(), params.require(&phi_block_name(g))?))
                    .collect::<Result<Vec<_>>>()?;
                Some(AnoObservable::new(scheme.clone(), per_group)?)
            }
            None => None,
        };
        let linear = match self.linear_in {
            Some(in_dim) => Some(LinearLayer::from_flat(in_dim, cfg.n_qubits, params.require(LINEAR_BLOCK)?)?),
            None => None,
        };
        Ok(QuantumParams { theta, ano, linear })
    }

    fn evaluate(&self, c: &QuantumParams, obs: &[f64]) -> Result<Vec<f64>> {
        let features = self.features(c, obs)?;
        Ok(self.model.forward(&c.theta, c.ano.as_ref(), &features)?.logits)
    }

    fn accumulate_grad(
        &self,
        c: &QuantumParams,
        obs: &[f64],
        weights: &[f64],
        scale: f64,
        out: &mut ParamStore,
    ) -> Result<()> {
        let features = self.features(c, obs)?;
        self.model.check_inputs(&c.theta, c.ano.as_ref(), &features)?;
        if weights.len() != self.n_outputs() {
            return error::config("logit weight count differs from output count");
        }
        let (d_theta, d_features, sv) = grad::shift_rule(
            &self.model,
            &c.theta.angles,
            c.ano.as_ref(),
            &features,
            weights,
            c.linear.is_some(),
        )?;
        axpy(out, THETA_BLOCK, &d_theta, scale)?;
        if let Some(scheme) = self.model.scheme() {
            for (o, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let rho = sv.reduced_density(&scheme.groups()[o])?;
                axpy(out, &phi_block_name(o), &observable::linear_form(&rho), scale * w)?;
            }
        }
        if let Some(layer) = &c.linear {
            let lg = layer.backward(obs, &d_features)?;
            let mut flat = lg.d_weights;
            flat.extend_from_slice(&lg.d_bias);
            axpy(out, LINEAR_BLOCK, &flat, scale)?;
        }
        Ok(())
    }
}

fn axpy(out: &mut ParamStore, name: &str, g: &[f64], scale: f64) -> Result<()> {
    let Some(block) = out.get_mut(name) else {
        return error::config(format!("gradient store lacks block `{name}`"));
    };
    if block.len() != g.len() {
        return error::config(format!("gradient block `{name}` has wrong length"));
    }
    for (b, v) in block.iter_mut().zip(g) {
        *b += scale * v;
    }
    Ok(())
}

/// Lookup table `Q[state][action]`; the observation's first entry is the
/// state index. Stands in for the quantum model when checking the drivers
/// against tabular oracles.
#[derive(Debug, Clone)]
pub struct TabularApproximator {
    pub n_states: usize,
    pub n_actions: usize,
}

impl TabularApproximator {
    fn state(&self, obs: &[f64]) -> Result<usize> {
        match obs.first() {
            Some(&s) if s >= 0.0 && (s as usize) < self.n_states && s.fract() == 0.0 => Ok(s as usize),
            _ => error::config(format!("observation {obs:?} is not a state index below {}", self.n_states)),
        }
    }
}

impl Approximator for TabularApproximator {
    type Compiled = Vec<f64>;

    fn n_outputs(&self) -> usize {
        self.n_actions
    }

    fn init_params(&self, _rng: &mut dyn RngCore) -> ParamStore {
        let mut s = ParamStore::new();
        s.push("table", BlockKind::Table, vec![0.0; self.n_states * self.n_actions]);
        s
    }

    fn compile(&self, params: &ParamStore) -> Result<Vec<f64>> {
        Ok(params.require("table")?.to_vec())
    }

    fn evaluate(&self, table: &Vec<f64>, obs: &[f64]) -> Result<Vec<f64>> {
        let s = self.state(obs)?;
        Ok(table[s * self.n_actions..(s + 1) * self.n_actions].to_vec())
    }

    fn accumulate_grad(&self, _: &Vec<f64>, obs: &[f64], weights: &[f64], scale: f64, out: &mut ParamStore) -> Result<()> {
        let s = self.state(obs)?;
        let n = self.n_actions;
        let block = out.get_mut("table").ok_or_else(|| crate::Error::Config("missing table".into()))?;
        for (a, w) in weights.iter().enumerate() {
            block[s * n + a] += scale * w;
        }
        Ok(())
    }
}
