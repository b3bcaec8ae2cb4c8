//! Wigner transforms of sampled operator kernels, phase-space traces,
//! quadrature marginals and Wigner tomography.
//!
//! Conventions: ħ = 1, W_A(q,p) = ∫ e^{−ipy} ⟨q + y/2|Â|q − y/2⟩ dy, and
//! phase-space integrals carry the measure dq dp/2π, so ∫W_ρ = Tr ρ̂ = 1 and
//! ∫W_A W_B = Tr(ÂB̂).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, TomoError};
use crate::numerics::{trapezoid_2d, trapezoid_weight, Grid1D};
use crate::radon::{forward_radon, inverse_radon, Density2D, InverseRadonOptions, Measure, Sinogram};

/// Hermiticity tolerance relative to the largest kernel entry.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-6;
pub const PSD_TOLERANCE: f64 = -1e-8;

/// Sampled kernel ⟨x_i|Â|x_j⟩ of an operator, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorKernel {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl OperatorKernel {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        let n = grid.len();
        if values.len() != n * n {
            return Err(TomoError::GridMismatch(format!(
                "{} kernel values for a {n}-point grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(TomoError::InvalidArgument("non-finite kernel value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Self {
        let pts = grid.points();
        let values = pts
            .par_iter()
            .flat_map_iter(|&xi| pts.iter().map(move |&xj| (xi, xj)))
            .map(|(xi, xj)| f(xi, xj))
            .collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len() * grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.len() + j]
    }

    /// Bilinear interpolation in (x₁, x₂); zero outside the grid.
    pub fn sample(&self, x1: f64, x2: f64) -> Complex64 {
        let (Some((i, ti)), Some((j, tj))) = (self.grid.locate(x1), self.grid.locate(x2)) else {
            return Complex64::new(0.0, 0.0);
        };
        let a = self.get(i, j);
        let b = self.get(i, j + 1);
        let c = self.get(i + 1, j);
        let d = self.get(i + 1, j + 1);
        (a * (1.0 - tj) + b * tj) * (1.0 - ti) + (c * (1.0 - tj) + d * tj) * ti
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.grid.len()).map(|i| self.get(i, i)).collect()
    }

    /// Σ K_ii Δx.
    pub fn trace(&self) -> Complex64 {
        self.diagonal().iter().sum::<Complex64>() * self.grid.spacing()
    }

    /// max |K_ij − conj(K_ji)|.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &OperatorKernel) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(TomoError::GridMismatch("kernels on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm())))
    }

    /// Pointwise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &OperatorKernel, b: f64) -> Result<OperatorKernel> {
        if !self.grid.same_as(&other.grid) {
            return Err(TomoError::GridMismatch("kernels on different grids".into()));
        }
        Ok(OperatorKernel {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| u * a + v * b)
                .collect(),
        })
    }

    /// The matrix K·Δx, whose eigenvalues approximate those of the operator.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let n = self.grid.len();
        let dx = self.grid.spacing();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j) * dx)
    }

    /// (K + K†)/2.
    pub fn hermitian_part(&self) -> OperatorKernel {
        let n = self.grid.len();
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.values[i * n + j] = (self.get(i, j) + self.get(j, i).conj()) * 0.5;
            }
        }
        out
    }

    /// Eigenvalues of the Hermitian part of K·Δx, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.hermitian_part().to_matrix();
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// A validated density-operator kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityKernel {
    kernel: OperatorKernel,
}

impl DensityKernel {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(kernel: OperatorKernel) -> Result<Self> {
        let checked = Self::from_estimate(kernel)?;
        let min = checked.kernel.eigenvalues()[0];
        if min < PSD_TOLERANCE {
            return Err(TomoError::InvalidState(format!(
                "kernel has eigenvalue {min:.3e}"
            )));
        }
        Ok(checked)
    }

    /// Checks Hermiticity and unit trace only; reconstructions from data
    /// may carry small negative eigenvalues.
    pub fn from_estimate(kernel: OperatorKernel) -> Result<Self> {
        let herm = kernel.hermiticity_residual();
        if herm > HERMITIAN_TOLERANCE * kernel.max_abs().max(1.0) {
            return Err(TomoError::InvalidState(format!(
                "kernel is not Hermitian (residual {herm:.3e})"
            )));
        }
        let tr = kernel.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(TomoError::InvalidState(format!(
                "kernel trace is {:.9}{:+.3e}i",
                tr.re, tr.im
            )));
        }
        Ok(Self { kernel })
    }

    pub fn kernel(&self) -> &OperatorKernel {
        &self.kernel
    }

    pub fn into_kernel(self) -> OperatorKernel {
        self.kernel
    }

    pub fn grid(&self) -> &Grid1D {
        self.kernel.grid()
    }

    /// Σ_ij |K_ij|² Δx².
    pub fn purity(&self) -> f64 {
        let dx = self.grid().spacing();
        self.kernel.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * dx * dx
    }

    /// Mixture Σ w_k ρ_k of kernels on one grid.
    pub fn mixture(parts: &[(f64, &DensityKernel)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| TomoError::InvalidArgument("empty mixture".into()))?;
        let mut acc = first.1.kernel.combine(first.0, &first.1.kernel, 0.0)?;
        for (w, k) in &parts[1..] {
            acc = acc.combine(1.0, &k.kernel, *w)?;
        }
        Self::new(acc)
    }
}

/// Real phase-space field with measure dq dp/2π.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    field: Density2D,
    imag_residual: f64,
}

impl WignerField {
    pub fn new(field: Density2D, imag_residual: f64) -> Result<Self> {
        if field.measure() != Measure::DqDpOver2Pi {
            return Err(TomoError::InvalidArgument(
                "a Wigner field uses the dq dp/2pi measure".into(),
            ));
        }
        Ok(Self {
            field,
            imag_residual,
        })
    }

    /// The constant field 1, the transform of the identity operator.
    pub fn identity(q: Grid1D, p: Grid1D) -> Self {
        Self {
            field: Density2D::from_fn(q, p, Measure::DqDpOver2Pi, |_, _| 1.0),
            imag_residual: 0.0,
        }
    }

    pub fn from_fn(q: Grid1D, p: Grid1D, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            field: Density2D::from_fn(q, p, Measure::DqDpOver2Pi, f),
            imag_residual: 0.0,
        }
    }

    pub fn field(&self) -> &Density2D {
        &self.field
    }

    pub fn into_field(self) -> Density2D {
        self.field
    }

    pub fn q_grid(&self) -> &Grid1D {
        self.field.x_grid()
    }

    pub fn p_grid(&self) -> &Grid1D {
        self.field.y_grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    /// Largest discarded imaginary part during construction.
    pub fn imag_residual(&self) -> f64 {
        self.imag_residual
    }

    /// ∫∫ W dq dp/2π.
    pub fn normalization(&self) -> f64 {
        self.field.mass()
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn sample(&self, q: f64, p: f64) -> f64 {
        self.field.sample(q, p)
    }

    pub fn relative_l2(&self, other: &WignerField) -> Result<f64> {
        self.field.relative_l2(&other.field)
    }

    pub fn combine(&self, a: f64, other: &WignerField, b: f64) -> Result<WignerField> {
        Ok(WignerField {
            field: self.field.combine(a, &other.field, b)?,
            imag_residual: self.imag_residual.max(other.imag_residual),
        })
    }
}

/// Largest |p| a kernel with coordinate spacing Δx can resolve. The
/// anti-diagonal samples K(q + mΔx, q − mΔx) are 2Δx apart in y.
pub fn p_limit(x_grid: &Grid1D) -> f64 {
    PI / (2.0 * x_grid.spacing())
}

/// W(q,p) = Σ_m e^{−2ipmΔ} K(q + mΔ, q − mΔ)·2Δ.
///
/// On-grid q values use the exact kernel samples; other q values
/// interpolate the kernel bilinearly. The imaginary part, which vanishes for
/// Hermitian kernels, is dropped and its largest magnitude recorded.
pub fn wigner_transform(kernel: &OperatorKernel, q: &Grid1D, p: &Grid1D) -> Result<WignerField> {
    let xg = kernel.grid();
    let limit = p_limit(xg);
    let reach = p.max_abs();
    if reach > limit * (1.0 + 1e-12) {
        return Err(TomoError::NyquistViolation {
            axis: "p",
            requested: reach,
            limit,
        });
    }
    let dx = xg.spacing();
    let ps = p.points();
    let nq = q.len();
    let columns: Vec<(Vec<f64>, f64)> = q
        .points()
        .par_iter()
        .map(|&qv| {
            let samples = antidiagonal(kernel, qv);
            let m_max = (samples.len() / 2) as f64;
            let mut col = Vec::with_capacity(ps.len());
            let mut imag = 0.0f64;
            for &pv in &ps {
                let step = Complex64::from_polar(1.0, -2.0 * pv * dx);
                let mut z = Complex64::from_polar(1.0, 2.0 * pv * dx * m_max);
                let mut acc = Complex64::new(0.0, 0.0);
                for s in &samples {
                    acc += s * z;
                    z *= step;
                }
                acc *= 2.0 * dx;
                col.push(acc.re);
                imag = imag.max(acc.im.abs());
            }
            (col, imag)
        })
        .collect();
    let mut values = vec![0.0; nq * ps.len()];
    let mut imag = 0.0f64;
    for (iq, (col, im)) in columns.into_iter().enumerate() {
        imag = imag.max(im);
        for (ip, v) in col.into_iter().enumerate() {
            values[ip * nq + iq] = v;
        }
    }
    WignerField::new(Density2D::new(*q, *p, values, Measure::DqDpOver2Pi)?, imag)
}

/// K(q + mΔ, q − mΔ) for m = −M..=M, the largest symmetric range inside the grid.
fn antidiagonal(kernel: &OperatorKernel, q: f64) -> Vec<Complex64> {
    let g = kernel.grid();
    let dx = g.spacing();
    if let Some(k) = g.node_index(q, 1e-9) {
        let m_max = k.min(g.len() - 1 - k);
        return (0..=2 * m_max)
            .map(|t| {
                let m = t as i64 - m_max as i64;
                kernel.get((k as i64 + m) as usize, (k as i64 - m) as usize)
            })
            .collect();
    }
    let room = (g.max() - q).min(q - g.min());
    if room < 0.0 {
        return vec![Complex64::new(0.0, 0.0)];
    }
    let m_max = (room / dx + 1e-9).floor() as i64;
    (-m_max..=m_max)
        .map(|m| {
            let y = m as f64 * dx;
            kernel.sample(q + y, q - y)
        })
        .collect()
}

/// ∫∫ W_A W_B dq dp/2π = Tr(ÂB̂).
pub fn trace_product(a: &WignerField, b: &WignerField) -> Result<f64> {
    if !a.field.same_grid(&b.field) {
        return Err(TomoError::GridMismatch("Wigner fields on different grids".into()));
    }
    let prod: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x * y).collect();
    Ok(trapezoid_2d(&prod, a.q_grid().len(), a.q_grid().spacing(), a.p_grid().spacing()) / (2.0 * PI))
}

/// W̃(u,v) sampled on `u × v`, row-major with `values[iv * nu + iu]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFunction {
    u: Grid1D,
    v: Grid1D,
    values: Vec<Complex64>,
}

impl CharacteristicFunction {
    pub fn u_grid(&self) -> &Grid1D {
        &self.u
    }

    pub fn v_grid(&self) -> &Grid1D {
        &self.v
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, iu: usize, iv: usize) -> Complex64 {
        self.values[iv * self.u.len() + iu]
    }
}

/// W̃(u,v) = Tr[ρ̂ e^{−i(ux̂ + vp̂)}] = e^{iuv/2} Σ_x K(x, x + v) e^{−iu(x + v)} Δx.
///
/// The exponential is split as e^{−iux̂}e^{−ivp̂}e^{iuv/2}; e^{−ivp̂} shifts
/// the second kernel argument and e^{−iux̂} is a phase.
pub fn characteristic_function(kernel: &OperatorKernel, u: &Grid1D, v: &Grid1D) -> Result<CharacteristicFunction> {
    let xg = kernel.grid();
    let u_lim = PI / xg.spacing();
    if u.max_abs() > u_lim * (1.0 + 1e-12) {
        return Err(TomoError::NyquistViolation {
            axis: "u",
            requested: u.max_abs(),
            limit: u_lim,
        });
    }
    if v.max_abs() > xg.extent() {
        return Err(TomoError::ShiftOutOfRange {
            shift: v.max_abs(),
            extent: xg.extent(),
        });
    }
    let us = u.points();
    let rows: Vec<Vec<Complex64>> = v
        .points()
        .par_iter()
        .map(|&vv| {
            let shifted = shifted_diagonal(kernel, vv);
            us.iter()
                .map(|&uu| {
                    shift_sum(&shifted, xg, uu, vv) * Complex64::from_polar(1.0, 0.5 * uu * vv)
                })
                .collect()
        })
        .collect();
    Ok(CharacteristicFunction {
        u: *u,
        v: *v,
        values: rows.concat(),
    })
}

/// K(x_i, x_i + b) for every grid point (zero where x_i + b leaves the grid).
pub(crate) fn shifted_diagonal(kernel: &OperatorKernel, b: f64) -> Vec<Complex64> {
    let g = kernel.grid();
    let n = g.len() as i64;
    let steps = b / g.spacing();
    let whole = steps.round();
    if (steps - whole).abs() < 1e-9 {
        let s = whole as i64;
        return (0..n)
            .map(|i| {
                let j = i + s;
                if (0..n).contains(&j) {
                    kernel.get(i as usize, j as usize)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
    }
    g.points().into_iter().map(|x| kernel.sample(x, x + b)).collect()
}

/// Σ_i e^{−ia(x_i + b)} S_i Δx.
pub(crate) fn shift_sum(shifted: &[Complex64], grid: &Grid1D, a: f64, b: f64) -> Complex64 {
    let dx = grid.spacing();
    let step = Complex64::from_polar(1.0, -a * dx);
    let mut z = Complex64::from_polar(1.0, -a * (grid.min() + b));
    let mut acc = Complex64::new(0.0, 0.0);
    for s in shifted {
        acc += s * z;
        z *= step;
    }
    acc * dx
}

/// W(q,p) = (1/2π) ∫∫ W̃(u,v) e^{i(uq + vp)} du dv by the 2D trapezoid rule.
pub fn wigner_from_characteristic(chi: &CharacteristicFunction, q: &Grid1D, p: &Grid1D) -> Result<WignerField> {
    let (nu, nv) = (chi.u.len(), chi.v.len());
    let (du, dv) = (chi.u.spacing(), chi.v.spacing());
    let us = chi.u.points();
    let vs = chi.v.points();
    // First the v integral for every (u, p), then the u integral.
    let partial: Vec<Vec<Complex64>> = p
        .points()
        .par_iter()
        .map(|&pv| {
            (0..nu)
                .map(|iu| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (iv, &vv) in vs.iter().enumerate() {
                        acc += chi.get(iu, iv) * Complex64::from_polar(trapezoid_weight(iv, nv), vv * pv);
                    }
                    acc * dv
                })
                .collect()
        })
        .collect();
    let qs = q.points();
    let mut values = Vec::with_capacity(qs.len() * partial.len());
    let mut imag = 0.0f64;
    for row in &partial {
        for &qv in &qs {
            let mut acc = Complex64::new(0.0, 0.0);
            for (iu, &uu) in us.iter().enumerate() {
                acc += row[iu] * Complex64::from_polar(trapezoid_weight(iu, nu), uu * qv);
            }
            let w = acc * du / (2.0 * PI);
            imag = imag.max(w.im.abs());
            values.push(w.re);
        }
    }
    WignerField::new(Density2D::new(*q, *p, values, Measure::DqDpOver2Pi)?, imag)
}

/// ρ_θ(x′) = ∫∫ W δ(x′ − q cosθ − p sinθ) dq dp/2π.
pub fn quadrature_distribution(w: &WignerField, theta: f64, offsets: &Grid1D) -> Result<Vec<f64>> {
    let sino = forward_radon(&w.field, &[theta], offsets)?;
    Ok(sino.row(0).to_vec())
}

/// Quadrature distributions at every angle.
pub fn quadrature_sinogram(w: &WignerField, angles: &[f64], offsets: &Grid1D) -> Result<Sinogram> {
    forward_radon(&w.field, angles, offsets)
}

/// Inverts quadrature distributions into a Wigner field. The rows are read
/// as probability densities in x′, whatever measure tag they carry.
pub fn reconstruct_wigner(
    quadratures: &Sinogram,
    q: &Grid1D,
    p: &Grid1D,
    options: &InverseRadonOptions,
) -> Result<WignerField> {
    let sino = if quadratures.measure() == Measure::DqDpOver2Pi {
        quadratures.clone()
    } else {
        Sinogram::new(
            quadratures.angles().to_vec(),
            *quadratures.offsets(),
            quadratures.values().to_vec(),
            Measure::DqDpOver2Pi,
        )?
    };
    WignerField::new(inverse_radon(&sino, q, p, options)?, 0.0)
}
