//! Classical trainable pieces: the input-reduction layer and the
//! adaptive-moment optimizer shared by every parameter block.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{self, Result};
use crate::params::{BlockKind, ParamStore};

/// Affine map followed by `pi * tanh`, producing encoding angles in
/// `(-pi, pi)`. Weights are row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of a [`LinearLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad {
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

impl LinearLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    /// Weights and bias uniform in `+-1/sqrt(in_dim)`.
    pub fn random<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let u = Uniform::new_inclusive(-bound, bound).expect("valid range");
        Self {
            in_dim,
            out_dim,
            weights: (0..in_dim * out_dim).map(|_| u.sample(rng)).collect(),
            bias: (0..out_dim).map(|_| u.sample(rng)).collect(),
        }
    }

    /// Flat layout `[weights.., bias..]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.extend_from_slice(&self.bias);
        v
    }

    pub fn from_flat(in_dim: usize, out_dim: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != in_dim * out_dim + out_dim {
            return error::config(format!(
                "linear block has {} entries, expected {}",
                flat.len(),
                in_dim * out_dim + out_dim
            ));
        }
        let (w, b) = flat.split_at(in_dim * out_dim);
        Ok(Self { in_dim, out_dim, weights: w.to_vec(), bias: b.to_vec() })
    }

    fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|o| {
                let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.bias[o]
            })
            .collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim {
            return error::config(format!("linear layer expects {} inputs, got {}", self.in_dim, input.len()));
        }
        // tanh rounds to exactly +-1 for |z| > ~19; keep angles off the boundary
        let cap = 1.0 - f64::EPSILON;
        Ok(self.pre_activation(input).into_iter().map(|z| PI * z.tanh().clamp(-cap, cap)).collect())
    }

    /// Chain rule through `pi * tanh` and the affine map, given the gradient
    /// with respect to the layer's outputs.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<LinearGrad> {
        if input.len() != self.in_dim || upstream.len() != self.out_dim {
            return error::config("linear backward shape mismatch");
        }
        let z = self.pre_activation(input);
        let dz: Vec<f64> = z
            .iter()
            .zip(upstream)
            .map(|(z, u)| {
                let t = z.tanh();
                u * PI * (1.0 - t * t)
            })
            .collect();
        let mut d_weights = vec![0.0; self.in_dim * self.out_dim];
        for (o, g) in dz.iter().enumerate() {
            for (i, x) in input.iter().enumerate() {
                d_weights[o * self.in_dim + i] = g * x;
            }
        }
        Ok(LinearGrad { d_weights, d_bias: dz })
    }
}

/// Per-block learning rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub theta: f64,
    pub phi: f64,
    pub linear: f64,
    pub table: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self { theta: 1e-3, phi: 1e-2, linear: 1e-3, table: 1e-1 }
    }
}

impl LearningRates {
    pub fn for_kind(&self, kind: BlockKind) -> f64 {
        match kind {
            BlockKind::Theta => self.theta,
            BlockKind::Phi => self.phi,
            BlockKind::Linear => self.linear,
            BlockKind::Table => self.table,
        }
    }
}

/// Adaptive-moment (Adam) state for one [`ParamStore`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub rates: LearningRates,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: ParamStore,
    v: ParamStore,
}

impl OptimizerState {
    pub fn new(layout: &ParamStore, rates: LearningRates) -> Self {
        Self {
            rates,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: layout.zeros_like(),
            v: layout.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of `params` along `-grads`. A non-finite
    /// gradient rejects the step and leaves both state and params untouched.
    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) -> Result<()> {
        if !params.same_layout(grads) || !params.same_layout(&self.m) {
            return error::config("optimizer, parameter and gradient layouts differ");
        }
        if !grads.all_finite() {
            return error::numeric("non-finite gradient; optimizer step rejected");
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let blocks = params
            .blocks_mut()
            .iter_mut()
            .zip(grads.blocks())
            .zip(self.m.blocks_mut().iter_mut().zip(self.v.blocks_mut().iter_mut()));
        for ((p, g), (m, v)) in blocks {
            let lr = self.rates.for_kind(p.kind);
            for i in 0..p.values.len() {
                let gi = g.values[i];
                m.values[i] = b1 * m.values[i] + (1.0 - b1) * gi;
                v.values[i] = b2 * v.values[i] + (1.0 - b2) * gi * gi;
                let m_hat = m.values[i] / bc1;
                let v_hat = v.values[i] / bc2;
                p.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_forward_cases() {
        let mut l = LinearLayer::zeros(3, 3);
        for i in 0..3 {
            l.weights[i * 3 + i] = 1.0;
        }
        let x = [0.1, -0.2, 0.05];
        let y = l.forward(&x).unwrap();
        for (a, b) in y.iter().zip(x) {
            assert!((a - PI * b.tanh()).abs() < 1e-15);
        }
        assert_eq!(LinearLayer::zeros(3, 2).forward(&x).unwrap(), vec![0.0, 0.0]);
        assert!(l.forward(&[1.0]).is_err());
    }

    #[test]
    fn linear_forward_matches_hand_multiply() {
        let l = LinearLayer { in_dim: 2, out_dim: 2, weights: vec![0.5, -1.0, 2.0, 0.25], bias: vec![0.1, -0.3] };
        let y = l.forward(&[0.4, 0.2]).unwrap();
        let z0: f64 = 0.5 * 0.4 - 1.0 * 0.2 + 0.1;
        let z1: f64 = 2.0 * 0.4 + 0.25 * 0.2 - 0.3;
        assert!((y[0] - PI * z0.tanh()).abs() < 1e-15);
        assert!((y[1] - PI * z1.tanh()).abs() < 1e-15);
    }

    #[test]
    fn linear_backward_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = LinearLayer::random(4, 3, &mut rng);
        let g = l.backward(&[0.3, 0.1, -0.5, 0.9], &[0.0; 3]).unwrap();
        assert!(g.d_weights.iter().chain(&g.d_bias).all(|v| *v == 0.0));

        let (w, b, x, u) = (0.7, -0.2, 1.3, 0.6);
        let l = LinearLayer { in_dim: 1, out_dim: 1, weights: vec![w], bias: vec![b] };
        let g = l.backward(&[x], &[u]).unwrap();
        let t = (w * x + b).tanh();
        assert!((g.d_weights[0] - PI * (1.0 - t * t) * x * u).abs() < 1e-14);
        assert!((g.d_bias[0] - PI * (1.0 - t * t) * u).abs() < 1e-14);
    }

    fn store(v: Vec<f64>, kind: BlockKind) -> ParamStore {
        let mut s = ParamStore::new();
        s.push("p", kind, v);
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = store(vec![0.5, -0.5], BlockKind::Theta);
        let g = p.zeros_like();
        let mut opt = OptimizerState::new(&p, LearningRates::default());
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p.get("p").unwrap(), &[0.5, -0.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2 after one step, so |delta| = lr * |g| / (|g| + eps)
        let mut p = store(vec![0.0], BlockKind::Theta);
        let g = store(vec![3.0], BlockKind::Theta);
        let mut opt = OptimizerState::new(&p, LearningRates::default());
        opt.step(&mut p, &g).unwrap();
        let expected = -1e-3 * 3.0 / (3.0 + 1e-8);
        assert!((p.get("p").unwrap()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn block_rates_scale_updates() {
        let mut p = ParamStore::new();
        p.push("t", BlockKind::Theta, vec![0.0]);
        p.push("f", BlockKind::Phi, vec![0.0]);
        let mut g = p.zeros_like();
        g.get_mut("t").unwrap()[0] = 1.0;
        g.get_mut("f").unwrap()[0] = 1.0;
        let mut opt = OptimizerState::new(&p, LearningRates::default());
        opt.step(&mut p, &g).unwrap();
        let ratio = p.get("f").unwrap()[0] / p.get("t").unwrap()[0];
        assert!((ratio - 10.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = store(vec![1.0], BlockKind::Phi);
        let g = store(vec![f64::NAN], BlockKind::Phi);
        let mut opt = OptimizerState::new(&p, LearningRates::default());
        assert!(matches!(opt.step(&mut p, &g), Err(crate::Error::Numeric(_))));
        assert_eq!(opt.steps(), 0);
        assert_eq!(p.get("p").unwrap(), &[1.0]);
    }
}
