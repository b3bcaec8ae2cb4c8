//! Prime-dimension qudits: Schwinger clock and shift operators, the d + 1
//! mutually unbiased bases and state reconstruction from their statistics.
//!
//! For odd prime d the basis b (0 ≤ b < d) consists of the eigenvectors of
//! XZ^b,
//!
//! |c;b⟩_n = d^{−1/2} ω^{b·n(n−1)/2 − cn},   XZ^b|c;b⟩ = ω^c|c;b⟩.
//!
//! For d = 2 that formula gives the same basis for b = 0 and b = 1 (XZ has
//! eigenvalues ±i, not ±1), so the qubit uses |c;b⟩_n = 2^{−1/2}(−1)^{cn} i^{bn},
//! the σ_x and σ_y eigenbases, with XZ^b|c;b⟩ = (−i)^b ω^c|c;b⟩. The last basis
//! of every family is the computational one.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TomoError};

pub type CMatrix = DMatrix<Complex64>;

pub const MAX_DIM: u32 = 101;
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-12;
pub const PSD_TOLERANCE: f64 = -1e-10;
/// Row sums accepted by [`reconstruct_qudit`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeDim(u32);

impl PrimeDim {
    pub fn new(d: u32) -> Result<Self> {
        let prime = d >= 2 && (2..).take_while(|k| k * k <= d).all(|k| !d.is_multiple_of(k));
        if !prime || d > MAX_DIM {
            return Err(TomoError::NotPrime(d));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn size(self) -> usize {
        self.0 as usize
    }

    /// ω^k with k reduced mod d first, so equal exponents give identical bits.
    pub fn omega_pow(self, k: i64) -> Complex64 {
        let d = self.0 as i64;
        let r = k.rem_euclid(d);
        Complex64::from_polar(1.0, 2.0 * PI * r as f64 / d as f64)
    }
}

pub fn mod_inverse(m: i64, d: PrimeDim) -> Result<i64> {
    let dd = d.get() as i64;
    let a = m.rem_euclid(dd);
    if a == 0 {
        return Err(TomoError::NotInvertible { m, d: d.get() });
    }
    let (mut r0, mut r1) = (dd, a);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    Ok(t0.rem_euclid(dd))
}

/// X|n⟩ = |n + 1 mod d⟩ and Z|n⟩ = ω^n|n⟩.
pub fn schwinger_ops(d: PrimeDim) -> (CMatrix, CMatrix) {
    let n = d.size();
    let x = CMatrix::from_fn(n, n, |r, c| if r == (c + 1) % n { ONE } else { ZERO });
    let z = CMatrix::from_fn(n, n, |r, c| if r == c { d.omega_pow(r as i64) } else { ZERO });
    (x, z)
}

pub fn matrix_power(m: &CMatrix, k: u32) -> CMatrix {
    let mut out = CMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// X^m Z^{mb} = ω^{−b·m(m−1)/2}(XZ^b)^m, entrywise within 10⁻¹².
pub fn power_identity_check(d: PrimeDim, m: u32, b: u32) -> bool {
    let (x, z) = schwinger_ops(d);
    let dd = d.get();
    let l = (m as u64 * b as u64 % dd as u64) as u32;
    let lhs = matrix_power(&x, m) * matrix_power(&z, l);
    let xzb = &x * matrix_power(&z, b % dd);
    let exponent = -((b as i64) * (m as i64) * (m as i64 - 1) / 2);
    let rhs = matrix_power(&xzb, m) * d.omega_pow(exponent);
    (lhs - rhs).iter().all(|v| v.norm() <= 1e-12)
}

/// The d + 1 bases; `bases[b]` holds |c;b⟩ in column c, `bases[d]` is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MubFamily {
    dim: PrimeDim,
    bases: Vec<CMatrix>,
}

impl MubFamily {
    pub fn dim(&self) -> PrimeDim {
        self.dim
    }

    pub fn bases(&self) -> &[CMatrix] {
        &self.bases
    }

    pub fn basis(&self, b: usize) -> &CMatrix {
        &self.bases[b]
    }

    pub fn vector(&self, b: usize, c: usize) -> DVector<Complex64> {
        self.bases[b].column(c).into_owned()
    }

    /// λ_b in XZ^b|c;b⟩ = λ_b ω^c|c;b⟩: 1 for odd d, (−i)^b for d = 2.
    pub fn eigen_phase(&self, b: usize) -> Complex64 {
        if self.dim.get() == 2 && b % 2 == 1 {
            Complex64::new(0.0, -1.0)
        } else {
            ONE
        }
    }

    /// max over pairs of bases of | |⟨u|v⟩|² − 1/d |, and of orthonormality defects.
    pub fn flatness_defect(&self) -> f64 {
        let d = self.dim.size();
        let target = 1.0 / d as f64;
        let mut worst = 0.0f64;
        for (i, a) in self.bases.iter().enumerate() {
            for (j, b) in self.bases.iter().enumerate().skip(i) {
                let g = a.adjoint() * b;
                for r in 0..d {
                    for c in 0..d {
                        let v = g[(r, c)].norm_sqr();
                        let want = if i != j {
                            target
                        } else if r == c {
                            1.0
                        } else {
                            0.0
                        };
                        worst = worst.max((v - want).abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn mub_family(d: PrimeDim) -> MubFamily {
    let n = d.size();
    let norm = 1.0 / (n as f64).sqrt();
    let mut bases = Vec::with_capacity(n + 1);
    for b in 0..n {
        let basis = CMatrix::from_fn(n, n, |row, c| {
            let (row, c, b) = (row as i64, c as i64, b as i64);
            let phase = if n == 2 {
                // (−1)^{cn} i^{bn} = ω^{cn} · i^{bn} with ω = −1.
                d.omega_pow(c * row) * Complex64::new(0.0, 1.0).powi((b * row) as i32)
            } else {
                d.omega_pow(b * row * (row - 1) / 2 - c * row)
            };
            phase * norm
        });
        bases.push(basis);
    }
    bases.push(CMatrix::identity(n, n));
    MubFamily { dim: d, bases }
}

/// A d × d density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QuditState {
    dim: PrimeDim,
    matrix: CMatrix,
}

impl QuditState {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(dim: PrimeDim, matrix: CMatrix) -> Result<Self> {
        let s = Self::from_estimate(dim, matrix)?;
        let min = s.eigenvalues()[0];
        if min < PSD_TOLERANCE {
            return Err(TomoError::InvalidState(format!("eigenvalue {min:.3e} is negative")));
        }
        Ok(s)
    }

    /// Checks shape, Hermiticity and unit trace; allows negative eigenvalues.
    pub fn from_estimate(dim: PrimeDim, matrix: CMatrix) -> Result<Self> {
        let n = dim.size();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(TomoError::InvalidState(format!(
                "expected a {n}x{n} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = (&matrix - matrix.adjoint()).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if herm > HERMITIAN_TOLERANCE {
            return Err(TomoError::InvalidState(format!("not Hermitian (residual {herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(TomoError::InvalidState(format!("trace is {tr}")));
        }
        Ok(Self { dim, matrix })
    }

    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let dim = PrimeDim::new(amplitudes.len() as u32)?;
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(TomoError::InvalidState("zero state vector".into()));
        }
        let v = v / Complex64::new(norm, 0.0);
        let m = &v * v.adjoint();
        Self::new(dim, hermitize(m))
    }

    pub fn basis_state(dim: PrimeDim, n: usize) -> Result<Self> {
        if n >= dim.size() {
            return Err(TomoError::InvalidState(format!("basis index {n} out of range")));
        }
        let mut m = CMatrix::zeros(dim.size(), dim.size());
        m[(n, n)] = ONE;
        Ok(Self { dim, matrix: m })
    }

    pub fn maximally_mixed(dim: PrimeDim) -> Self {
        let n = dim.size();
        Self {
            dim,
            matrix: CMatrix::identity(n, n) / Complex64::new(n as f64, 0.0),
        }
    }

    /// GG†/Tr(GG†) with G a complex Ginibre matrix drawn from `seed`.
    pub fn random_mixed(dim: PrimeDim, seed: u64) -> Self {
        let n = dim.size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(n, n, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        Self {
            dim,
            matrix: hermitize(m / tr),
        }
    }

    /// Normalized Gaussian random vector drawn from `seed`.
    pub fn random_pure(dim: PrimeDim, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<Complex64> = (0..dim.size())
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        Self::pure(&v).expect("Gaussian vector is non-zero")
    }

    pub fn dim(&self) -> PrimeDim {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Clips negative eigenvalues to zero and renormalizes the trace.
    pub fn project_psd(&self) -> Self {
        let eig = self.matrix.clone().symmetric_eigen();
        let clipped: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let n = self.dim.size();
        let mut m = CMatrix::zeros(n, n);
        for (k, lam) in clipped.iter().enumerate() {
            if *lam == 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            m += (v * v.adjoint()) * Complex64::new(lam / total, 0.0);
        }
        Self {
            dim: self.dim,
            matrix: hermitize(m),
        }
    }
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Σ of singular values of a − b.
pub fn trace_norm_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = a - b;
    diff.singular_values().iter().sum()
}

/// `rows[b][c]` = probability of outcome c in basis b; row d is the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MubProbabilities {
    dim: PrimeDim,
    rows: Vec<Vec<f64>>,
}

impl MubProbabilities {
    pub fn new(dim: PrimeDim, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = dim.size();
        if rows.len() != n + 1 || rows.iter().any(|r| r.len() != n) {
            return Err(TomoError::InvalidArgument(format!(
                "expected {} rows of {n} probabilities",
                n + 1
            )));
        }
        Ok(Self { dim, rows })
    }

    pub fn dim(&self) -> PrimeDim {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.rows
    }

    /// Pointwise `λ·self + (1 − λ)·other`.
    pub fn mix(&self, lambda: f64, other: &MubProbabilities) -> MubProbabilities {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect())
            .collect();
        MubProbabilities {
            dim: self.dim,
            rows,
        }
    }

    pub fn max_abs_diff(&self, other: &MubProbabilities) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub fn measurement_probabilities(rho: &QuditState, fam: &MubFamily) -> MubProbabilities {
    let rows = fam
        .bases()
        .iter()
        .map(|basis| {
            let g = basis.adjoint() * rho.matrix() * basis;
            (0..basis.ncols()).map(|c| g[(c, c)].re).collect()
        })
        .collect();
    MubProbabilities {
        dim: fam.dim(),
        rows,
    }
}

/// ρ = Σ_{b,c} p_b(c)|c;b⟩⟨c;b| + Σ_n p(n)|n⟩⟨n| − I.
pub fn reconstruct_qudit(probs: &MubProbabilities, fam: &MubFamily) -> Result<QuditState> {
    let n = fam.dim().size();
    if probs.dim() != fam.dim() {
        return Err(TomoError::InvalidArgument("probabilities and family differ in d".into()));
    }
    for (row, p) in probs.rows().iter().enumerate() {
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(TomoError::RowNotNormalized { row, sum });
        }
        if let Some((outcome, &value)) = p.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(TomoError::NegativeProbability { row, outcome, value });
        }
    }
    let mut m = -CMatrix::identity(n, n);
    for (basis, p) in fam.bases().iter().zip(probs.rows()) {
        // B·diag(p)·B†
        let scaled = CMatrix::from_fn(n, n, |r, c| basis[(r, c)] * p[c]);
        m += scaled * basis.adjoint();
    }
    QuditState::from_estimate(fam.dim(), hermitize(m))
}

/// Empirical frequencies from `shots` draws per basis, reproducible from `seed`.
/// The generator is ChaCha8 seeded by `seed`; bases are sampled in order.
pub fn sample_measurements(rho: &QuditState, fam: &MubFamily, shots: u64, seed: u64) -> Result<MubProbabilities> {
    if shots == 0 {
        return Err(TomoError::InvalidArgument("shots must be at least 1".into()));
    }
    let exact = measurement_probabilities(rho, fam);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(exact.rows.len());
    for p in &exact.rows {
        let weights: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| TomoError::InvalidState(format!("bad outcome weights: {e}")))?;
        let mut counts = vec![0u64; p.len()];
        for _ in 0..shots {
            counts[dist.sample(&mut rng)] += 1;
        }
        rows.push(counts.iter().map(|&c| c as f64 / shots as f64).collect());
    }
    Ok(MubProbabilities {
        dim: exact.dim,
        rows,
    })
}

/// {(XZ^b)^m : 0 ≤ b < d, 1 ≤ m < d} ∪ {Z^l : 0 ≤ l < d}, d² operators.
pub fn operator_basis(d: PrimeDim) -> Vec<CMatrix> {
    let (x, z) = schwinger_ops(d);
    let n = d.get();
    let mut ops = Vec::with_capacity((n * n) as usize);
    for b in 0..n {
        let xzb = &x * matrix_power(&z, b);
        for m in 1..n {
            ops.push(matrix_power(&xzb, m));
        }
    }
    for l in 0..n {
        ops.push(matrix_power(&z, l));
    }
    ops
}

/// Numerical rank of the Gram matrix G_ij = Tr(A_i† A_j).
pub fn gram_rank(ops: &[CMatrix], relative_tolerance: f64) -> usize {
    let k = ops.len();
    let gram = CMatrix::from_fn(k, k, |i, j| (ops[i].adjoint() * &ops[j]).trace());
    let ev = gram.symmetric_eigenvalues();
    let top = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ev.iter().filter(|v| v.abs() > relative_tolerance * top).count()
}
