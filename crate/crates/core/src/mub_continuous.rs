//! Density-matrix elements from rotated-quadrature distributions through
//! the displacement-operator expansion ρ̂ = (1/2π)∫∫ c(a,b) Ẑ(a,b) da db.
//!
//! Every quadrature row gives the characteristic function along one ray,
//!
//! Φ_θ(r) = ∫ ρ_θ(x′) e^{irx′} dx′ = Tr[ρ̂ e^{ir(x̂ cosθ + p̂ sinθ)}],
//!
//! and Φ_{θ+π}(r) = conj Φ_θ(r) extends the rays to the full circle. With
//! G(a,b) = Tr[ρ̂ e^{i(ax̂ + bp̂)}] the kernel is
//!
//! ⟨x₁|ρ̂|x₂⟩ = (1/2π) ∫ da G(a, x₁ − x₂) e^{−ia(x₁ + x₂)/2}.
//!
//! This is the θ-integral of the principal-value formula after the x″
//! integration has been done in closed form (the ε-kernel turns into the
//! factor |κ|e^{−ε|κ|}) and θ has been traded for a = (x₁ − x₂)cotθ, which
//! absorbs the 1/sin²θ weight. G is resampled from the polar samples by a
//! trigonometric series in θ and cubic interpolation in r.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::numerics::{check_decay, Grid1D, DEFAULT_EPSILON_FRACTION, DEFAULT_LEAK_TOLERANCE};
use crate::radon::Sinogram;
use crate::wigner::{shift_sum, shifted_diagonal, DensityKernel, OperatorKernel};

/// Angles with |sinθ| below this are refused.
pub const MIN_SIN_IN_DATA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Sampled { shots: u64 },
}

/// Quadrature probability densities, angle-major, with their origin.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    sinogram: Sinogram,
    provenance: Provenance,
}

impl QuadratureDataset {
    pub fn new(sinogram: Sinogram, provenance: Provenance) -> Result<Self> {
        let tolerance = match provenance {
            Provenance::Exact => 1e-3,
            Provenance::Sampled { shots } => 1e-3 + 5.0 / (shots.max(1) as f64).sqrt(),
        };
        for i in 0..sinogram.angles().len() {
            if let Some(v) = sinogram.row(i).iter().find(|v| **v < -1e-12) {
                return Err(TomoError::InvalidState(format!(
                    "quadrature row {i} has negative value {v:.3e}"
                )));
            }
            let mass = sinogram.row_mass(i);
            if (mass - 1.0).abs() > tolerance {
                return Err(TomoError::InvalidState(format!(
                    "quadrature row {i} integrates to {mass:.6}"
                )));
            }
        }
        Ok(Self {
            sinogram,
            provenance,
        })
    }

    pub fn sinogram(&self) -> &Sinogram {
        &self.sinogram
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// c(a,b) = Tr[ρ̂ Ẑ†(a,b)] = Σ_i e^{−iax_i} K(x_i, x_i + b) Δx with
/// Ẑ(a,b) = e^{iax̂}e^{ibp̂}. Off-grid shifts interpolate the kernel.
pub fn displacement_coefficient(kernel: &OperatorKernel, a: f64, b: f64) -> Result<Complex64> {
    let g = kernel.grid();
    if b.abs() > g.extent() {
        return Err(TomoError::ShiftOutOfRange {
            shift: b,
            extent: g.extent(),
        });
    }
    let shifted = shifted_diagonal(kernel, b);
    // shift_sum carries e^{−ia(x + b)}; undo the extra e^{−iab}.
    Ok(shift_sum(&shifted, g, a, b) * Complex64::from_polar(1.0, a * b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmReconstructionOptions {
    /// ε of the principal-value kernel; `None` ties it to the offset spacing.
    pub epsilon: Option<f64>,
    pub leak_tolerance: f64,
    /// Clip negative eigenvalues after symmetrization.
    pub floor_eigenvalues: bool,
}

impl Default for DmReconstructionOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            leak_tolerance: DEFAULT_LEAK_TOLERANCE,
            floor_eigenvalues: false,
        }
    }
}

/// Corrections applied to the raw estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmDiagnostics {
    /// max |K − K†| / max |K| before symmetrization.
    pub hermiticity_residual: f64,
    /// Re Tr K before renormalization.
    pub trace_before: f64,
    /// Smallest eigenvalue of the returned kernel.
    pub min_eigenvalue: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct DmReconstruction {
    pub kernel: DensityKernel,
    pub diagnostics: DmDiagnostics,
}

/// Polar samples of G with their angular Fourier coefficients.
struct PolarSpectrum {
    dr: f64,
    r_max: f64,
    /// `coeffs[k * m + l]`, l in FFT order.
    coeffs: Vec<Complex64>,
    m: usize,
    theta0: f64,
}

impl PolarSpectrum {
    fn build(sino: &Sinogram, r_max: f64, dr: f64) -> Result<Self> {
        let n_angles = sino.angles().len();
        let m = 2 * n_angles;
        let offsets = sino.offsets();
        let dx = offsets.spacing();
        let x0 = offsets.min();
        let n_r = (r_max / dr).ceil() as usize + 3;
        let rows: Vec<&[f64]> = (0..n_angles).map(|j| sino.row(j)).collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let columns: Vec<Vec<Complex64>> = (0..n_r)
            .into_par_iter()
            .map(|k| {
                let r = k as f64 * dr;
                let step = Complex64::from_polar(1.0, r * dx);
                let start = Complex64::from_polar(1.0, r * x0);
                let last = offsets.len() - 1;
                let mut col = vec![Complex64::new(0.0, 0.0); m];
                for (j, row) in rows.iter().enumerate() {
                    let mut z = start;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (i, v) in row.iter().enumerate() {
                        let w = if i == 0 || i == last { 0.5 } else { 1.0 };
                        acc += z * (v * w);
                        z *= step;
                    }
                    acc *= dx;
                    col[j] = acc;
                    col[j + n_angles] = acc.conj();
                }
                fft.process(&mut col);
                let scale = 1.0 / m as f64;
                col.iter_mut().for_each(|c| *c *= scale);
                col
            })
            .collect();
        Ok(Self {
            dr,
            r_max,
            coeffs: columns.concat(),
            m,
            theta0: sino.angles()[0],
        })
    }

    /// G at polar point (r, t): cubic Lagrange in r, trigonometric sum in t.
    fn eval(&self, r: f64, t: f64, scratch: &mut [Complex64]) -> Complex64 {
        if r > self.r_max {
            return Complex64::new(0.0, 0.0);
        }
        let m = self.m;
        let u = r / self.dr;
        let k = (u.floor() as usize).max(1);
        let f = u - k as f64;
        let w = [
            -f * (f - 1.0) * (f - 2.0) / 6.0,
            (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
            -(f + 1.0) * f * (f - 2.0) / 2.0,
            (f + 1.0) * f * (f - 1.0) / 6.0,
        ];
        for (l, s) in scratch.iter_mut().enumerate() {
            *s = Complex64::new(0.0, 0.0);
            for (q, wq) in w.iter().enumerate() {
                *s += self.coeffs[(k - 1 + q) * m + l] * wq;
            }
        }
        let step = Complex64::from_polar(1.0, t - self.theta0);
        let half = m / 2;
        // l = 0..half-1 are non-negative frequencies, half..m-1 are l − m.
        let mut acc = Complex64::new(0.0, 0.0);
        let mut z = Complex64::new(1.0, 0.0);
        for s in scratch.iter().take(half) {
            acc += s * z;
            z *= step;
        }
        let mut z = step.inv().powu(half as u32);
        for s in scratch.iter().skip(half) {
            acc += s * z;
            z *= step;
        }
        acc
    }
}

fn check_angles(sino: &Sinogram) -> Result<()> {
    let angles = sino.angles();
    if angles.len() < 2 {
        return Err(TomoError::TooFewAngles {
            got: angles.len(),
            min: 2,
        });
    }
    for &t in angles {
        if t.sin().abs() < MIN_SIN_IN_DATA {
            return Err(TomoError::SingularAngleInData {
                theta: t,
                limit: MIN_SIN_IN_DATA,
            });
        }
    }
    let step = PI / angles.len() as f64;
    let uniform = angles
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() < 1e-9)
        && angles[0] >= 0.0
        && angles[0] < step;
    if !uniform {
        return Err(TomoError::InvalidArgument(
            "density-matrix reconstruction needs angles (j + s)·pi/N with 0 <= s < 1".into(),
        ));
    }
    Ok(())
}

pub fn reconstruct_density_matrix(
    data: &QuadratureDataset,
    out_grid: &Grid1D,
    options: &DmReconstructionOptions,
) -> Result<DmReconstruction> {
    let sino = data.sinogram();
    check_angles(sino)?;
    for i in 0..sino.angles().len() {
        check_decay(sino.row(i), options.leak_tolerance)?;
    }
    let offsets = sino.offsets();
    let epsilon = options
        .epsilon
        .unwrap_or(DEFAULT_EPSILON_FRACTION * offsets.spacing());
    if !(epsilon >= 0.0) {
        return Err(TomoError::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let r_max = PI / offsets.spacing();
    let dr = PI / (8.0 * offsets.max_abs());
    let spectrum = PolarSpectrum::build(sino, r_max, dr)?;

    let reach = out_grid.max_abs().max(offsets.max_abs());
    let da_target = 2.0 * PI / (5.0 * reach);
    let half_count = (r_max / da_target).ceil() as i64;
    let da = r_max / half_count as f64;
    let a_values: Vec<f64> = (-half_count..=half_count).map(|k| k as f64 * da).collect();

    let n = out_grid.len();
    let dx = out_grid.spacing();
    let xs = out_grid.points();
    let diagonals: Vec<(i64, Vec<Complex64>)> = (-(n as i64 - 1)..n as i64)
        .into_par_iter()
        .map(|d| {
            let delta = d as f64 * dx;
            let mut scratch = vec![Complex64::new(0.0, 0.0); spectrum.m];
            let g: Vec<Complex64> = a_values
                .iter()
                .map(|&a| {
                    let r = a.hypot(delta);
                    let t = delta.atan2(a).rem_euclid(2.0 * PI);
                    spectrum.eval(r, t, &mut scratch) * ((-epsilon * r).exp() * da)
                })
                .collect();
            let lo = d.max(0) as usize;
            let hi = (n as i64 + d.min(0)) as usize;
            let entries = (lo..hi)
                .map(|i| {
                    let j = (i as i64 - d) as usize;
                    let xbar = 0.5 * (xs[i] + xs[j]);
                    let step = Complex64::from_polar(1.0, -da * xbar);
                    let mut z = Complex64::from_polar(1.0, -a_values[0] * xbar);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for gv in &g {
                        acc += gv * z;
                        z *= step;
                    }
                    acc / (2.0 * PI)
                })
                .collect();
            (d, entries)
        })
        .collect();
    let mut raw = OperatorKernel::zeros(*out_grid);
    {
        let vals = raw.values_mut();
        for (d, entries) in diagonals {
            let lo = d.max(0) as usize;
            for (k, v) in entries.into_iter().enumerate() {
                let i = lo + k;
                let j = (i as i64 - d) as usize;
                vals[i * n + j] = v;
            }
        }
    }

    let peak = raw.max_abs();
    let hermiticity_residual = if peak > 0.0 {
        raw.hermiticity_residual() / peak
    } else {
        0.0
    };
    let mut kernel = raw.hermitian_part();
    let trace_before = kernel.trace().re;
    if !(trace_before.abs() > 0.0) {
        return Err(TomoError::InvalidState("reconstructed kernel has zero trace".into()));
    }
    kernel.values_mut().iter_mut().for_each(|v| *v /= trace_before);
    if options.floor_eigenvalues {
        kernel = floor_eigenvalues(&kernel);
    }
    let min_eigenvalue = kernel.eigenvalues()[0];
    Ok(DmReconstruction {
        kernel: DensityKernel::from_estimate(kernel)?,
        diagnostics: DmDiagnostics {
            hermiticity_residual,
            trace_before,
            min_eigenvalue,
            epsilon,
        },
    })
}

fn floor_eigenvalues(kernel: &OperatorKernel) -> OperatorKernel {
    let n = kernel.grid().len();
    let dx = kernel.grid().spacing();
    let eig = kernel.to_matrix().symmetric_eigen();
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for (k, lam) in clipped.iter().enumerate() {
        if *lam == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let w = lam / (total * dx);
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] += v[i] * v[j].conj() * w;
            }
        }
    }
    let out = OperatorKernel::new(*kernel.grid(), values).expect("same grid");
    out.hermitian_part()
}
