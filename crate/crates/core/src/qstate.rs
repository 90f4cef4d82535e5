//! Dense statevector simulation.
//!
//! Bit ordering: qubit 0 is the most significant bit of the amplitude index,
//! so on `n` qubits qubit `q` toggles index bit `n - 1 - q`. Every other
//! module (groupings, reduced densities, dense test oracles) relies on this.

use num_complex::Complex64;

use crate::error::{self, Result};

pub const MAX_QUBITS: usize = 8;

/// Single-qubit rotation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Pure state of `n_qubits` qubits as a dense amplitude array.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `n_qubits` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return error::config(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            ));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Builds a state from raw amplitudes. The caller is responsible for
    /// normalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return error::config(format!("amplitude count {len} is not 2^n with n >= 1"));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return error::config(format!("{n_qubits} qubits exceeds {MAX_QUBITS}"));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    fn stride(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return error::index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            ));
        }
        Ok(())
    }

    /// Applies a 2x2 matrix `[[m00, m01], [m10, m11]]` to `qubit`.
    fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let stride = self.stride(qubit);
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += 2 * stride;
        }
    }

    pub fn apply_hadamard(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let stride = self.stride(qubit);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = (a0 + a1) * s;
                self.amps[i + stride] = (a0 - a1) * s;
            }
            base += 2 * stride;
        }
        Ok(())
    }

    /// Applies `exp(-i * angle * sigma_axis / 2)` to `qubit`.
    pub fn apply_rotation(&mut self, qubit: usize, axis: Axis, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        if !angle.is_finite() {
            return error::numeric(format!("non-finite rotation angle {angle}"));
        }
        self.apply_single(qubit, rotation_matrix(axis, angle));
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return error::index(format!("CNOT control and target are both {control}"));
        }
        let cmask = self.stride(control);
        let tmask = self.stride(target);
        for i in 0..self.amps.len() {
            // visit each swapped pair once, from the side with target bit 0
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// Partial trace onto `qubits`; row/column order of the result follows
    /// the given qubit order (first listed qubit is the most significant bit).
    pub fn reduced_density(&self, qubits: &[usize]) -> Result<DensityMatrix> {
        let k = qubits.len();
        self.check_subsystem(qubits)?;
        let (block, dim, env) = self.group_major(qubits);
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            let row_r = &block[r * env..(r + 1) * env];
            for c in r..dim {
                let row_c = &block[c * env..(c + 1) * env];
                let v: Complex64 = row_r.iter().zip(row_c).map(|(a, b)| a * b.conj()).sum();
                entries[r * dim + c] = v;
                entries[c * dim + r] = v.conj();
            }
        }
        Ok(DensityMatrix { k_qubits: k, entries })
    }

    /// Non-empty list of distinct valid qubits.
    pub(crate) fn check_subsystem(&self, qubits: &[usize]) -> Result<()> {
        let k = qubits.len();
        if k == 0 || k > self.n_qubits {
            return error::index(format!(
                "subsystem of {k} qubits invalid for {} qubits",
                self.n_qubits
            ));
        }
        let mut seen = 0usize;
        for &q in qubits {
            self.check_qubit(q)?;
            if seen & (1 << q) != 0 {
                return error::index(format!("duplicate qubit {q} in subsystem"));
            }
            seen |= 1 << q;
        }
        Ok(())
    }

    /// Rearranges amplitudes into a `dim x env` row-major block where the row
    /// index enumerates the subsystem basis in `qubits` order and the column
    /// index enumerates the complement in ascending qubit order.
    pub(crate) fn group_major(&self, qubits: &[usize]) -> (Vec<Complex64>, usize, usize) {
        let n = self.n_qubits;
        let k = qubits.len();
        let dim = 1usize << k;
        let env = 1usize << (n - k);
        let complement: Vec<usize> = (0..n).filter(|q| !qubits.contains(q)).collect();
        let mut block = vec![Complex64::new(0.0, 0.0); dim * env];
        for (idx, amp) in self.amps.iter().enumerate() {
            let bit = |q: usize| (idx >> (n - 1 - q)) & 1;
            let r = qubits.iter().fold(0, |acc, &q| (acc << 1) | bit(q));
            let e = complement.iter().fold(0, |acc, &q| (acc << 1) | bit(q));
            block[r * env + e] = *amp;
        }
        (block, dim, env)
    }

    /// <Z> on a single qubit.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = self.stride(qubit);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }
}

pub fn rotation_matrix(axis: Axis, angle: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (angle / 2.0).sin_cos();
    let z = Complex64::new(0.0, 0.0);
    match axis {
        Axis::X => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ],
        Axis::Y => [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ],
        Axis::Z => [[Complex64::new(c, -s), z], [z, Complex64::new(c, s)]],
    }
}

/// Density matrix of a `k_qubits` subsystem, row-major `2^k x 2^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    k_qubits: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn k_qubits(&self) -> usize {
        self.k_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.k_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }
}
