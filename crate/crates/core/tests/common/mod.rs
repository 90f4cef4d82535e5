//! Dense reference implementations shared by the integration tests. They
//! build every gate and observable as an explicit `2^n x 2^n` matrix, so they
//! share no code paths with the strided simulator.

#![allow(dead_code)]

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

pub type C = Complex64;
pub type Mat = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn identity(d: usize) -> Mat {
    (0..d).map(|i| (0..d).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()).collect()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matvec(m: &Mat, v: &[C]) -> Vec<C> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn hadamard() -> Mat {
    let h = c(FRAC_1_SQRT_2, 0.0);
    vec![vec![h, h], vec![h, -h]]
}

/// `exp(-i t sigma / 2)` written out per axis (0 = X, 1 = Y, 2 = Z).
pub fn rot(axis: usize, t: f64) -> Mat {
    let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
    match axis {
        0 => vec![vec![c(co, 0.0), c(0.0, -si)], vec![c(0.0, -si), c(co, 0.0)]],
        1 => vec![vec![c(co, 0.0), c(-si, 0.0)], vec![c(si, 0.0), c(co, 0.0)]],
        _ => vec![vec![c(co, -si), c(0.0, 0.0)], vec![c(0.0, 0.0), c(co, si)]],
    }
}

/// Single-qubit matrix on qubit `q` (qubit 0 = most significant bit).
pub fn on_qubit(n: usize, q: usize, u: &Mat) -> Mat {
    let left = identity(1 << q);
    let right = identity(1 << (n - q - 1));
    kron(&kron(&left, u), &right)
}

pub fn cnot(n: usize, control: usize, target: usize) -> Mat {
    let d = 1 << n;
    let mut m = vec![vec![c(0.0, 0.0); d]; d];
    for x in 0..d {
        let cb = (x >> (n - 1 - control)) & 1;
        let y = x ^ (cb << (n - 1 - target));
        m[y][x] = c(1.0, 0.0);
    }
    m
}

/// Dense Hermitian matrix from flat parameters `[diag, upper_re, upper_im]`
/// with `H[i][j] = a + i b` above the diagonal.
pub fn hermitian(dim: usize, flat: &[f64]) -> Mat {
    let p = dim * (dim - 1) / 2;
    let mut h = vec![vec![c(0.0, 0.0); dim]; dim];
    let mut idx = 0;
    for i in 0..dim {
        h[i][i] = c(flat[i], 0.0);
        for j in (i + 1)..dim {
            h[i][j] = c(flat[dim + idx], flat[dim + p + idx]);
            h[j][i] = h[i][j].conj();
            idx += 1;
        }
    }
    h
}

/// `P^dag (H (x) I) P`: `H` acting on `group` (in listed order) of an
/// `n`-qubit register, identity elsewhere.
pub fn embed(n: usize, group: &[usize], h: &Mat) -> Mat {
    let d = 1 << n;
    let bit = |x: usize, q: usize| (x >> (n - 1 - q)) & 1;
    let sub = |x: usize| group.iter().fold(0, |acc, &q| (acc << 1) | bit(x, q));
    let rest = |x: usize| (0..n).filter(|q| !group.contains(q)).fold(0, |acc, q| (acc << 1) | bit(x, q));
    let mut m = vec![vec![c(0.0, 0.0); d]; d];
    for x in 0..d {
        for y in 0..d {
            if rest(x) == rest(y) {
                m[x][y] = h[sub(x)][sub(y)];
            }
        }
    }
    m
}

pub fn expval(op: &Mat, psi: &[C]) -> C {
    let hp = matvec(op, psi);
    psi.iter().zip(&hp).map(|(a, b)| a.conj() * b).sum()
}

pub fn pauli_z() -> Mat {
    vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]]
}

/// Final state of the model circuit built gate by gate as dense matrices:
/// H on all qubits, RY(feature), then per layer CNOT chains on even then odd
/// pairs followed by RX, RY, RZ with angles `theta[layer][qubit][axis]`.
pub fn model_state(n: usize, layers: usize, theta: &[f64], features: &[f64]) -> Vec<C> {
    let mut psi = vec![c(0.0, 0.0); 1 << n];
    psi[0] = c(1.0, 0.0);
    for q in 0..n {
        psi = matvec(&on_qubit(n, q, &hadamard()), &psi);
    }
    for q in 0..n {
        psi = matvec(&on_qubit(n, q, &rot(1, features[q])), &psi);
    }
    for l in 0..layers {
        for start in [0, 1] {
            let mut a = start;
            while a + 1 < n {
                psi = matvec(&cnot(n, a, a + 1), &psi);
                a += 2;
            }
        }
        for q in 0..n {
            for axis in 0..3 {
                let t = theta[(l * n + q) * 3 + axis];
                psi = matvec(&on_qubit(n, q, &rot(axis, t)), &psi);
            }
        }
    }
    psi
}

/// Cyclic window `g, g+1, .., g+k-1 (mod n)`.
pub fn window(n: usize, k: usize, g: usize) -> Vec<usize> {
    (0..k).map(|i| (g + i) % n).collect()
}

/// Dense logits: group windows with per-group flat observables, or Pauli Z
/// on the first qubits when `phis` is `None`.
pub fn dense_logits(
    n: usize,
    layers: usize,
    k: usize,
    theta: &[f64],
    phis: Option<&[Vec<f64>]>,
    features: &[f64],
    n_out: usize,
) -> Vec<f64> {
    let psi = model_state(n, layers, theta, features);
    (0..n_out)
        .map(|o| {
            let op = match phis {
                Some(p) => embed(n, &window(n, k, o), &hermitian(1 << k, &p[o])),
                None => on_qubit(n, o, &pauli_z()),
            };
            expval(&op, &psi).re
        })
        .collect()
}
