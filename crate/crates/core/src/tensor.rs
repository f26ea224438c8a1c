//! Dense complex linear algebra for small qubit registers.
//!
//! Basis ordering: party 1 is the most significant qubit, so amplitude index
//! `k` has party `p` (0-based) in state `(k >> (n - 1 - p)) & 1`. All matrices
//! are row-major.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A single-qubit operator.
pub type Mat2 = [[C64; 2]; 2];

/// Absolute tolerance used for all consistency checks in the crate.
pub const TOLERANCE: f64 = 1e-9;

/// Bloch vectors within this distance of unit norm are renormalized.
pub const BLOCH_NORM_SLACK: f64 = 1e-2;

/// Imaginary residue above this in an expectation value is an error.
pub const IMAGINARY_RESIDUE_LIMIT: f64 = 1e-6;

pub const MAX_QUBITS: usize = 12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub const IDENTITY2: Mat2 = [[ONE, ZERO], [ZERO, ONE]];
pub const PAULI_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub const PAULI_Y: Mat2 = [[ZERO, C64::new(0.0, -1.0)], [I, ZERO]];
pub const PAULI_Z: Mat2 = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];
pub const PAULIS: [Mat2; 3] = [PAULI_X, PAULI_Y, PAULI_Z];

/// Square complex matrix with power-of-two dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_mat2(m: &Mat2) -> Self {
        Self { dim: 2, data: vec![m[0][0], m[0][1], m[1][0], m[1][1]] }
    }

    /// `|ψ⟩⟨ψ|`
    pub fn outer(psi: &[C64]) -> Self {
        let dim = psi.len();
        let mut data = Vec::with_capacity(dim * dim);
        for a in psi {
            for b in psi {
                data.push(a * b.conj());
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * factor).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Result<Self> {
        self.check_dim(other.dim)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn add_scaled_in_place(&mut self, other: &Matrix, factor: f64) -> Result<()> {
        self.check_dim(other.dim)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * factor;
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Self> {
        self.check_dim(other.dim)?;
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check_dim(v.len())?;
        let d = self.dim;
        Ok((0..d)
            .map(|i| self.data[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn kron(&self, other: &Matrix) -> Self {
        let (da, db) = (self.dim, other.dim);
        let d = da * db;
        let mut out = Self::zeros(d);
        for i in 0..da {
            for j in 0..da {
                let a = self.data[i * da + j];
                for k in 0..db {
                    for l in 0..db {
                        out.data[(i * db + k) * d + j * db + l] = a * other.data[k * db + l];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Positive semidefinite up to `tol`: the Cholesky factorization of
    /// `self + tol·I` must succeed.
    pub fn is_psd(&self, tol: f64) -> bool {
        let d = self.dim;
        let mut l = vec![ZERO; d * d];
        for j in 0..d {
            let mut diag = self.get(j, j).re + tol;
            for k in 0..j {
                diag -= l[j * d + k].norm_sqr();
            }
            if diag <= 0.0 {
                return false;
            }
            let ljj = diag.sqrt();
            l[j * d + j] = C64::new(ljj, 0.0);
            for i in j + 1..d {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k].conj();
                }
                l[i * d + j] = s / ljj;
            }
        }
        true
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found });
        }
        Ok(())
    }
}

/// Binary qubit observable `r·σ` with unit Bloch vector `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Observable2 {
    bloch: [f64; 3],
}

impl Observable2 {
    pub const SIGMA_X: Observable2 = Observable2 { bloch: [1.0, 0.0, 0.0] };
    pub const SIGMA_Y: Observable2 = Observable2 { bloch: [0.0, 1.0, 0.0] };
    pub const SIGMA_Z: Observable2 = Observable2 { bloch: [0.0, 0.0, 1.0] };

    /// Renormalizes vectors within [`BLOCH_NORM_SLACK`] of the unit sphere and
    /// rejects anything further off (including non-finite entries).
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let norm = r.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > BLOCH_NORM_SLACK {
            return Err(Error::InvalidBlochVector { vector: r, norm });
        }
        Ok(Self { bloch: [r[0] / norm, r[1] / norm, r[2] / norm] })
    }

    /// Direction of a nonzero vector, without the near-unit check. Used by
    /// the optimizer where the raw gradient has arbitrary length.
    pub(crate) fn from_direction(g: [f64; 3]) -> Option<Self> {
        let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        (norm.is_finite() && norm > 0.0).then(|| Self { bloch: [g[0] / norm, g[1] / norm, g[2] / norm] })
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.bloch
    }

    pub fn negated(&self) -> Self {
        Self { bloch: self.bloch.map(|c| -c) }
    }

    pub fn matrix(&self) -> Mat2 {
        let [x, y, z] = self.bloch;
        [[C64::new(z, 0.0), C64::new(x, -y)], [C64::new(x, y), C64::new(-z, 0.0)]]
    }

    /// Projector `(I + a·A)/2` onto outcome `a ∈ {±1}`.
    pub fn projector(&self, outcome: i8) -> Mat2 {
        let a = f64::from(outcome);
        let m = self.matrix();
        let mut p = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                p[i][j] = (IDENTITY2[i][j] + m[i][j] * a) * 0.5;
            }
        }
        p
    }
}

impl TryFrom<[f64; 3]> for Observable2 {
    type Error = Error;

    fn try_from(r: [f64; 3]) -> Result<Self> {
        Self::from_bloch(r)
    }
}

impl From<Observable2> for [f64; 3] {
    fn from(o: Observable2) -> Self {
        o.bloch
    }
}

pub fn bloch_to_observable(r: [f64; 3]) -> Result<Observable2> {
    Observable2::from_bloch(r)
}

/// Operator on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorN {
    n: usize,
    matrix: Matrix,
}

impl OperatorN {
    pub fn new(matrix: Matrix) -> Result<Self> {
        let n = qubits_for_dim(matrix.dim())?;
        Ok(Self { n, matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self { n, matrix: Matrix::identity(1 << n) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

/// Kronecker product in party order.
pub fn tensor_product(factors: &[Mat2]) -> Result<OperatorN> {
    let (first, rest) = factors.split_first().ok_or(Error::EmptyProduct)?;
    if factors.len() > MAX_QUBITS {
        return Err(Error::QubitCount { n: factors.len(), min: 1, max: MAX_QUBITS });
    }
    let matrix = rest.iter().fold(Matrix::from_mat2(first), |acc, f| acc.kron(&Matrix::from_mat2(f)));
    Ok(OperatorN { n: factors.len(), matrix })
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidState(format!("dimension {dim} is not a power of two >= 2")));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::QubitCount { n, min: 1, max: MAX_QUBITS });
    }
    Ok(n)
}

/// Applies `op` on qubit `party` of an `n`-qubit vector laid out with
/// `stride` between consecutive basis entries.
fn apply_local(data: &mut [C64], offset: usize, stride: usize, n: usize, party: usize, op: &Mat2) {
    let mask = 1usize << (n - 1 - party);
    for k in 0..(1usize << n) {
        if k & mask != 0 {
            continue;
        }
        let (i, j) = (offset + k * stride, offset + (k | mask) * stride);
        let (u, v) = (data[i], data[j]);
        data[i] = op[0][0] * u + op[0][1] * v;
        data[j] = op[1][0] * u + op[1][1] * v;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n: usize,
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let n = qubits_for_dim(amplitudes.len())?;
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidState(format!("squared norm {norm2} is not 1")));
        }
        Ok(Self { n, amplitudes })
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(amplitudes)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        let w = C64::from_polar(1.0, phase);
        Self { n: self.n, amplitudes: self.amplitudes.iter().map(|a| a * w).collect() }
    }

    pub fn density_matrix(&self) -> Matrix {
        Matrix::outer(&self.amplitudes)
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()
    }
}

/// `(|0…0⟩ + |1…1⟩)/√2` on `n` qubits.
pub fn ghz_state(n: usize) -> Result<PureState> {
    if !(2..=MAX_QUBITS).contains(&n) {
        return Err(Error::QubitCount { n, min: 2, max: MAX_QUBITS });
    }
    let dim = 1usize << n;
    let mut amplitudes = vec![ZERO; dim];
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amplitudes[0] = h;
    amplitudes[dim - 1] = h;
    Ok(PureState { n, amplitudes })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    n: usize,
    matrix: Matrix,
}

impl MixedState {
    pub fn new(matrix: Matrix) -> Result<Self> {
        let n = qubits_for_dim(matrix.dim())?;
        if matrix.as_slice().iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState("non-finite density matrix entry".into()));
        }
        if !matrix.is_hermitian(TOLERANCE) {
            return Err(Error::InvalidState("density matrix is not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TOLERANCE || tr.im.abs() > TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        if !matrix.is_psd(TOLERANCE) {
            return Err(Error::InvalidState("density matrix has a negative eigenvalue".into()));
        }
        Ok(Self { n, matrix })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

/// White-noise mixture `v·|ψ⟩⟨ψ| + (1−v)·I/2ⁿ`.
pub fn depolarize(state: &PureState, v: f64) -> Result<MixedState> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::NoiseVisibility(v));
    }
    let dim = state.amplitudes.len();
    let mut rho = state.density_matrix().scale(v);
    rho.add_scaled_in_place(&Matrix::identity(dim), (1.0 - v) / dim as f64)?;
    MixedState::new(rho)
}

#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Pure(PureState),
    Mixed(MixedState),
}

impl State {
    pub fn n(&self) -> usize {
        match self {
            State::Pure(s) => s.n,
            State::Mixed(s) => s.n,
        }
    }

    pub fn density_matrix(&self) -> Matrix {
        match self {
            State::Pure(s) => s.density_matrix(),
            State::Mixed(s) => s.matrix.clone(),
        }
    }

    /// Expectation of `factors[0] ⊗ … ⊗ factors[n-1]` without forming the
    /// `2ⁿ × 2ⁿ` operator.
    pub fn product_expectation(&self, factors: &[Mat2]) -> Result<f64> {
        let n = self.n();
        if factors.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: factors.len() });
        }
        let value = match self {
            State::Pure(s) => {
                let mut phi = s.amplitudes.clone();
                for (party, op) in factors.iter().enumerate() {
                    apply_local(&mut phi, 0, 1, n, party, op);
                }
                s.amplitudes.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum::<C64>()
            }
            State::Mixed(s) => {
                // Tr[O ρ]: apply O to every column of ρ, then take the diagonal.
                let dim = 1usize << n;
                let mut m = s.matrix.data.clone();
                for col in 0..dim {
                    for (party, op) in factors.iter().enumerate() {
                        apply_local(&mut m, col, dim, n, party, op);
                    }
                }
                (0..dim).map(|i| m[i * dim + i]).sum::<C64>()
            }
        };
        real_part(value)
    }
}

impl From<PureState> for State {
    fn from(s: PureState) -> Self {
        State::Pure(s)
    }
}

impl From<MixedState> for State {
    fn from(s: MixedState) -> Self {
        State::Mixed(s)
    }
}

fn real_part(value: C64) -> Result<f64> {
    if !value.re.is_finite() || value.im.abs() > IMAGINARY_RESIDUE_LIMIT {
        return Err(Error::Numeric(format!("expectation value {value} has imaginary residue")));
    }
    Ok(value.re)
}

/// Born-rule expectation `Tr[ρ·op]` (or `⟨ψ|op|ψ⟩`).
pub fn expectation(state: &State, op: &OperatorN) -> Result<f64> {
    if state.n() != op.n {
        return Err(Error::DimensionMismatch { expected: state.n(), found: op.n });
    }
    let value = match state {
        State::Pure(s) => {
            let phi = op.matrix.mul_vec(&s.amplitudes)?;
            s.amplitudes.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum::<C64>()
        }
        State::Mixed(s) => op.matrix.matmul(&s.matrix)?.trace(),
    };
    real_part(value)
}
