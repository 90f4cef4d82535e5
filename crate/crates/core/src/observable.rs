//! Adaptive non-local observables: trainable Hermitian matrices measured on
//! sliding cyclic windows of qubits.
//!
//! A `K x K` Hermitian (`K = 2^k`) is parameterized by its real diagonal
//! `c_ii` and the real/imaginary parts `a_ij`, `b_ij` of the strict upper
//! triangle, with `H[i][j] = a_ij + i*b_ij` for `i < j` and the lower triangle
//! fixed by conjugation. Upper-triangle parameters are stored row-major over
//! pairs `(0,1), (0,2), .., (0,K-1), (1,2), ..`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::eigen;
use crate::error::{self, Result};
use crate::qstate::{DensityMatrix, StateVector};

pub const INIT_DIAG_STD: f64 = 0.1;
pub const INIT_OFF_DIAG_STD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianParams {
    k_local: usize,
    diag: Vec<f64>,
    upper_re: Vec<f64>,
    upper_im: Vec<f64>,
}

/// Number of strict upper-triangle pairs of a `dim x dim` matrix.
fn n_pairs(dim: usize) -> usize {
    dim * (dim - 1) / 2
}

impl HermitianParams {
    pub fn zeros(k_local: usize) -> Self {
        let dim = 1 << k_local;
        Self {
            k_local,
            diag: vec![0.0; dim],
            upper_re: vec![0.0; n_pairs(dim)],
            upper_im: vec![0.0; n_pairs(dim)],
        }
    }

    pub fn new(k_local: usize, diag: Vec<f64>, upper_re: Vec<f64>, upper_im: Vec<f64>) -> Result<Self> {
        let dim = 1 << k_local;
        if diag.len() != dim || upper_re.len() != n_pairs(dim) || upper_im.len() != n_pairs(dim) {
            return error::config(format!(
                "Hermitian parameter lengths ({}, {}, {}) do not match k = {k_local}",
                diag.len(),
                upper_re.len(),
                upper_im.len()
            ));
        }
        Ok(Self { k_local, diag, upper_re, upper_im })
    }

    /// Diagonal ~ N(0, 0.1), off-diagonal parts ~ N(0, 0.05).
    pub fn random<R: Rng + ?Sized>(k_local: usize, rng: &mut R) -> Self {
        let mut hp = Self::zeros(k_local);
        let nd = Normal::new(0.0, INIT_DIAG_STD).expect("valid std");
        let no = Normal::new(0.0, INIT_OFF_DIAG_STD).expect("valid std");
        hp.diag.iter_mut().for_each(|v| *v = nd.sample(rng));
        hp.upper_re.iter_mut().for_each(|v| *v = no.sample(rng));
        hp.upper_im.iter_mut().for_each(|v| *v = no.sample(rng));
        hp
    }

    /// Pauli-Z-like diagonal `[1, -1]` on a single qubit.
    pub fn pauli_z() -> Self {
        Self::new(1, vec![1.0, -1.0], vec![0.0], vec![0.0]).expect("shape")
    }

    pub fn k_local(&self) -> usize {
        self.k_local
    }

    pub fn dim(&self) -> usize {
        1 << self.k_local
    }

    pub fn n_params(&self) -> usize {
        self.dim() * self.dim()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper_re(&self) -> &[f64] {
        &self.upper_re
    }

    pub fn upper_im(&self) -> &[f64] {
        &self.upper_im
    }

    /// Flat layout `[diag.., upper_re.., upper_im..]`, length `K^2`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.diag);
        v.extend_from_slice(&self.upper_re);
        v.extend_from_slice(&self.upper_im);
        v
    }

    pub fn from_flat(k_local: usize, flat: &[f64]) -> Result<Self> {
        let dim = 1usize << k_local;
        if flat.len() != dim * dim {
            return error::config(format!(
                "flat Hermitian block has {} entries, expected {}",
                flat.len(),
                dim * dim
            ));
        }
        let p = n_pairs(dim);
        Self::new(
            k_local,
            flat[..dim].to_vec(),
            flat[dim..dim + p].to_vec(),
            flat[dim + p..].to_vec(),
        )
    }

    /// Dense row-major `K x K` matrix.
    pub fn materialize(&self) -> Vec<Complex64> {
        let dim = self.dim();
        let mut h = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            h[i * dim + i] = Complex64::new(self.diag[i], 0.0);
        }
        let mut p = 0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = Complex64::new(self.upper_re[p], self.upper_im[p]);
                h[i * dim + j] = v;
                h[j * dim + i] = v.conj();
                p += 1;
            }
        }
        h
    }

    /// Ascending eigenvalues, via Jacobi on the real embedding
    /// `[[A, -B], [B, A]]` of `H = A + iB` (each eigenvalue appears twice).
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let dim = self.dim();
        if dim > 64 {
            return error::config(format!("spectrum limited to K <= 64, got {dim}"));
        }
        let h = self.materialize();
        let n = 2 * dim;
        let mut m = vec![0.0; n * n];
        for i in 0..dim {
            for j in 0..dim {
                let v = h[i * dim + j];
                m[i * n + j] = v.re;
                m[(i + dim) * n + (j + dim)] = v.re;
                m[i * n + (j + dim)] = -v.im;
                m[(i + dim) * n + j] = v.im;
            }
        }
        let doubled = eigen::symmetric_eigenvalues(&m, n)?;
        Ok(doubled.into_iter().step_by(2).collect())
    }
}

/// Coefficients of `<H>` as a linear form in the flat parameters: for a
/// density `rho`, `<H(phi)> = dot(linear_form(rho), phi)`. Entries are
/// `rho_ii`, `2 Re rho_ij`, `2 Im rho_ij`, which is also the phi-gradient.
pub fn linear_form(rho: &DensityMatrix) -> Vec<f64> {
    let dim = rho.dim();
    let p = n_pairs(dim);
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        out[i] = rho.get(i, i).re;
    }
    let mut idx = 0;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let r = rho.get(i, j);
            out[dim + idx] = 2.0 * r.re;
            out[dim + p + idx] = 2.0 * r.im;
            idx += 1;
        }
    }
    out
}

fn check_shape(group: &[usize], hp: &HermitianParams) -> Result<()> {
    if group.len() != hp.k_local() {
        return error::config(format!(
            "group of {} qubits measured with a {}-local observable",
            group.len(),
            hp.k_local()
        ));
    }
    Ok(())
}

/// `Tr(rho_group H(phi))` for the reduced state of `group`.
pub fn expectation(sv: &StateVector, group: &[usize], hp: &HermitianParams) -> Result<f64> {
    check_shape(group, hp)?;
    sv.check_subsystem(group)?;
    // same sum as dot(linear_form(rho), hp) without building rho, one
    // environment column at a time
    let (m, dim, env) = sv.group_major(group);
    let mut col = vec![Complex64::new(0.0, 0.0); dim];
    let mut total = 0.0;
    for e in 0..env {
        for (r, v) in col.iter_mut().enumerate() {
            *v = m[r * env + e];
        }
        let mut p = 0;
        for i in 0..dim {
            let vi = col[i];
            total += hp.diag[i] * vi.norm_sqr();
            let rest = &col[i + 1..];
            let (re, im) = (&hp.upper_re[p..p + rest.len()], &hp.upper_im[p..p + rest.len()]);
            let mut acc = 0.0;
            for ((vj, a), b) in rest.iter().zip(re).zip(im) {
                let zr = vi.re * vj.re + vi.im * vj.im;
                let zi = vi.im * vj.re - vi.re * vj.im;
                acc += a * zr + b * zi;
            }
            total += 2.0 * acc;
            p += rest.len();
        }
    }
    Ok(total)
}

/// Gradient of `expectation` with respect to the flat parameters of `hp`.
pub fn expectation_grad_phi(sv: &StateVector, group: &[usize], hp: &HermitianParams) -> Result<HermitianParams> {
    check_shape(group, hp)?;
    let rho = sv.reduced_density(group)?;
    HermitianParams::from_flat(hp.k_local(), &linear_form(&rho))
}

/// Cyclic contiguous windows over the register, one per starting qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupingScheme {
    n_qubits: usize,
    k_local: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupingScheme {
    pub fn build(n_qubits: usize, k_local: usize) -> Result<Self> {
        if k_local == 0 || k_local > n_qubits {
            return error::config(format!(
                "locality exceeds qubit count (k = {k_local}, n = {n_qubits})"
            ));
        }
        let groups = (0..n_qubits)
            .map(|g| (0..k_local).map(|i| (g + i) % n_qubits).collect())
            .collect();
        Ok(Self { n_qubits, k_local, groups })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn k_local(&self) -> usize {
        self.k_local
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// One independent Hermitian observable per grouping window.
#[derive(Debug, Clone, PartialEq)]
pub struct AnoObservable {
    scheme: GroupingScheme,
    per_group: Vec<HermitianParams>,
}

impl AnoObservable {
    pub fn new(scheme: GroupingScheme, per_group: Vec<HermitianParams>) -> Result<Self> {
        if per_group.len() != scheme.groups().len() {
            return error::config(format!(
                "{} observables for {} groups",
                per_group.len(),
                scheme.groups().len()
            ));
        }
        if let Some(bad) = per_group.iter().find(|hp| hp.k_local() != scheme.k_local()) {
            return error::config(format!(
                "observable locality {} differs from scheme locality {}",
                bad.k_local(),
                scheme.k_local()
            ));
        }
        Ok(Self { scheme, per_group })
    }

    pub fn random<R: Rng + ?Sized>(scheme: GroupingScheme, rng: &mut R) -> Self {
        let per_group = (0..scheme.groups().len())
            .map(|_| HermitianParams::random(scheme.k_local(), rng))
            .collect();
        Self { scheme, per_group }
    }

    pub fn zeros(scheme: GroupingScheme) -> Self {
        let per_group = vec![HermitianParams::zeros(scheme.k_local()); scheme.groups().len()];
        Self { scheme, per_group }
    }

    pub fn scheme(&self) -> &GroupingScheme {
        &self.scheme
    }

    pub fn per_group(&self) -> &[HermitianParams] {
        &self.per_group
    }

    pub fn per_group_mut(&mut self) -> &mut [HermitianParams] {
        &mut self.per_group
    }

    /// Expectation of group `g`'s observable.
    pub fn expectation(&self, sv: &StateVector, g: usize) -> Result<f64> {
        expectation(sv, &self.scheme.groups()[g], &self.per_group[g])
    }
}
