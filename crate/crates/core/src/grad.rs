//! Gradients of model logits.
//!
//! Rotation angles (variational `theta` and encoding features) use the
//! parameter-shift rule `(f(a + pi/2) - f(a - pi/2)) / 2`, exact for
//! generators with eigenvalues `+-1/2`. Observable parameters enter the
//! output linearly, so their gradient is the reduced density's linear form.
//!
//! All routines accept a weight vector over logits and differentiate
//! `sum_o w_o * logit_o`; single-logit gradients use a one-hot weight.

use std::f64::consts::FRAC_PI_2;

use crate::error::{self, Result};
use crate::observable::{self, AnoObservable, HermitianParams};
use crate::qmodel::{Angle, Circuit, Gate, QModel, ThetaParams};
use crate::qstate::StateVector;

#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub d_theta: Vec<f64>,
    /// One block per grouping; empty for Pauli-Z readout.
    pub d_phi: Vec<HermitianParams>,
    pub d_features: Vec<f64>,
}

impl GradBundle {
    pub fn all_finite(&self) -> bool {
        self.d_theta.iter().chain(&self.d_features).all(|v| v.is_finite())
            && self.d_phi.iter().all(|hp| hp.to_flat().iter().all(|v| v.is_finite()))
    }
}

fn one_hot(model: &QModel, output_index: usize) -> Result<Vec<f64>> {
    let n = model.config().n_outputs;
    if output_index >= n {
        return error::index(format!("output {output_index} out of range for {n} logits"));
    }
    let mut w = vec![0.0; n];
    w[output_index] = 1.0;
    Ok(w)
}

/// Gradient bundle of `sum_o weights[o] * logit_o`.
pub fn gradients(
    model: &QModel,
    theta: &ThetaParams,
    ano: Option<&AnoObservable>,
    features: &[f64],
    weights: &[f64],
) -> Result<GradBundle> {
    model.check_inputs(theta, ano, features)?;
    if weights.len() != model.config().n_outputs {
        return error::config(format!(
            "{} logit weights for {} outputs",
            weights.len(),
            model.config().n_outputs
        ));
    }
    let (d_theta, d_features, final_state) = shift_rule(model, &theta.angles, ano, features, weights, true)?;
    let d_phi = phi_from_state(model, ano, &final_state, weights)?;
    Ok(GradBundle { d_theta, d_phi, d_features })
}

/// Parameter-shift over every symbolic angle (feature angles only when
/// `with_features`), caching the state before each shifted gate so only the
/// circuit suffix is re-simulated.
pub(crate) fn shift_rule(
    model: &QModel,
    theta: &[f64],
    ano: Option<&AnoObservable>,
    features: &[f64],
    weights: &[f64],
    with_features: bool,
) -> Result<(Vec<f64>, Vec<f64>, StateVector)> {
    let circuit = model.circuit();
    let mut d_theta = vec![0.0; theta.len()];
    let mut d_features = vec![0.0; features.len()];
    let mut sv = StateVector::zero_state(circuit.n_qubits)?;
    for (j, gate) in circuit.gates.iter().enumerate() {
        if let Gate::Rot { qubit, axis, angle } = *gate {
            let slot = match angle {
                Angle::Theta(i) => Some((true, i)),
                Angle::Feature(i) if with_features => Some((false, i)),
                Angle::Feature(_) => None,
                Angle::Fixed(_) => None,
            };
            if let Some((is_theta, i)) = slot {
                let base = Circuit::resolve(angle, theta, features);
                let mut vals = [0.0; 2];
                for (v, shift) in vals.iter_mut().zip([FRAC_PI_2, -FRAC_PI_2]) {
                    let mut shifted = sv.clone();
                    shifted.apply_rotation(qubit, axis, base + shift)?;
                    for g in &circuit.gates[j + 1..] {
                        Circuit::apply_gate(&mut shifted, g, theta, features)?;
                    }
                    *v = model.read_weighted(&shifted, ano, weights)?;
                }
                let d = 0.5 * (vals[0] - vals[1]);
                if is_theta {
                    d_theta[i] += d;
                } else {
                    d_features[i] += d;
                }
            }
        }
        Circuit::apply_gate(&mut sv, gate, theta, features)?;
    }
    Ok((d_theta, d_features, sv))
}

fn phi_from_state(
    model: &QModel,
    ano: Option<&AnoObservable>,
    sv: &StateVector,
    weights: &[f64],
) -> Result<Vec<HermitianParams>> {
    let (Some(scheme), Some(ano)) = (model.scheme(), ano) else {
        return Ok(Vec::new());
    };
    let mut out: Vec<HermitianParams> = vec![HermitianParams::zeros(scheme.k_local()); scheme.groups().len()];
    for (o, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let group = &scheme.groups()[o];
        let rho = sv.reduced_density(group)?;
        let form = observable::linear_form(&rho);
        let scaled: Vec<f64> = form.iter().map(|v| w * v).collect();
        out[o] = HermitianParams::from_flat(ano.per_group()[o].k_local(), &scaled)?;
    }
    Ok(out)
}

/// d logit / d theta, flattened like [`ThetaParams::angles`].
pub fn grad_theta(
    model: &QModel,
    theta: &ThetaParams,
    ano: Option<&AnoObservable>,
    features: &[f64],
    output_index: usize,
) -> Result<Vec<f64>> {
    Ok(gradients(model, theta, ano, features, &one_hot(model, output_index)?)?.d_theta)
}

/// d logit / d phi per grouping; groups other than `output_index` get zeros.
pub fn grad_phi(
    model: &QModel,
    theta: &ThetaParams,
    ano: Option<&AnoObservable>,
    features: &[f64],
    output_index: usize,
) -> Result<Vec<HermitianParams>> {
    model.check_inputs(theta, ano, features)?;
    let w = one_hot(model, output_index)?;
    let sv = model.state(&theta.angles, features)?;
    phi_from_state(model, ano, &sv, &w)
}

/// d logit / d encoding angle.
pub fn grad_features(
    model: &QModel,
    theta: &ThetaParams,
    ano: Option<&AnoObservable>,
    features: &[f64],
    output_index: usize,
) -> Result<Vec<f64>> {
    Ok(gradients(model, theta, ano, features, &one_hot(model, output_index)?)?.d_features)
}

/// Parameter block selected for a finite-difference check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Theta,
    Phi,
    Features,
}

/// Central finite differences of one logit with respect to a whole block;
/// used as an independent check on the analytic gradients. The result is
/// flat: `Phi` concatenates every group's flat parameters.
pub fn fd_oracle(
    model: &QModel,
    theta: &ThetaParams,
    ano: Option<&AnoObservable>,
    features: &[f64],
    output_index: usize,
    block: Block,
    step: f64,
) -> Result<Vec<f64>> {
    if !(1e-8..=1e-3).contains(&step) {
        return error::config(format!("finite-difference step {step} outside [1e-8, 1e-3]"));
    }
    let eval = |t: &ThetaParams, a: Option<&AnoObservable>, f: &[f64]| -> Result<f64> {
        Ok(model.forward(t, a, f)?.logits[output_index])
    };
    match block {
        Block::Theta => (0..theta.angles.len())
            .map(|i| {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus.angles[i] += step;
                minus.angles[i] -= step;
                Ok((eval(&plus, ano, features)? - eval(&minus, ano, features)?) / (2.0 * step))
            })
            .collect(),
        Block::Features => (0..features.len())
            .map(|i| {
                let mut plus = features.to_vec();
                let mut minus = features.to_vec();
                plus[i] += step;
                minus[i] -= step;
                Ok((eval(theta, ano, &plus)? - eval(theta, ano, &minus)?) / (2.0 * step))
            })
            .collect(),
        Block::Phi => {
            let Some(ano) = ano else { return Ok(Vec::new()) };
            let mut out = Vec::new();
            for g in 0..ano.per_group().len() {
                let flat = ano.per_group()[g].to_flat();
                let k = ano.per_group()[g].k_local();
                for i in 0..flat.len() {
                    let shifted = |delta: f64| -> Result<f64> {
                        let mut a = ano.clone();
                        let mut f = flat.clone();
                        f[i] += delta;
                        a.per_group_mut()[g] = HermitianParams::from_flat(k, &f)?;
                        eval(theta, Some(&a), features)
                    };
                    out.push((shifted(step)? - shifted(-step)?) / (2.0 * step));
                }
            }
            Ok(out)
        }
    }
}
