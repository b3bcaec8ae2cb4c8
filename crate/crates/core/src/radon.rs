//! Forward and inverse Radon transforms of 2D densities.
//!
//! A density on the plane is projected onto the rotated axis
//! x′ = x cosθ + y sinθ. Phase-space densities use the measure dq dp/2π, so
//! their projections carry an extra 1/(2π) and their inversion prefactor is
//! −1/π instead of −1/(2π²). Both conventions go through [`Measure`] so the
//! factors are applied in exactly one place.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::numerics::{
    check_decay, lerp_at, trapezoid, trapezoid_2d, Grid1D, PvFilter, PvKernel, RampFilter,
    RampOptions, DEFAULT_LEAK_TOLERANCE,
};

/// Fewest projection angles accepted by the inversion.
pub const MIN_ANGLES: usize = 8;

/// Pixels below this fraction of the peak are ignored by the support check.
const SUPPORT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Ordinary area element dx dy.
    PlainDxDy,
    /// Phase-space element dq dp/2π.
    DqDpOver2Pi,
}

impl Measure {
    /// Factor multiplying dx dy.
    pub fn factor(self) -> f64 {
        match self {
            Measure::PlainDxDy => 1.0,
            Measure::DqDpOver2Pi => 1.0 / (2.0 * PI),
        }
    }

    /// Multiplies ∫dθ Ramp[ρ_θ](α) to give the density.
    fn ramp_prefactor(self) -> f64 {
        match self {
            Measure::PlainDxDy => 1.0 / (2.0 * PI),
            Measure::DqDpOver2Pi => 1.0,
        }
    }
}

/// Real field sampled on `x × y`, stored row-major with `values[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density2D {
    x: Grid1D,
    y: Grid1D,
    values: Vec<f64>,
    measure: Measure,
}

impl Density2D {
    pub fn new(x: Grid1D, y: Grid1D, values: Vec<f64>, measure: Measure) -> Result<Self> {
        if values.len() != x.len() * y.len() {
            return Err(TomoError::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                x.len(),
                y.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(TomoError::InvalidArgument(format!("non-finite density value {bad}")));
        }
        Ok(Self {
            x,
            y,
            values,
            measure,
        })
    }

    pub fn from_fn(x: Grid1D, y: Grid1D, measure: Measure, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = x.points();
        let values = y
            .points()
            .iter()
            .flat_map(|&yv| xs.iter().map(move |&xv| (xv, yv)))
            .map(|(xv, yv)| f(xv, yv))
            .collect();
        Self {
            x,
            y,
            values,
            measure,
        }
    }

    pub fn zeros(x: Grid1D, y: Grid1D, measure: Measure) -> Self {
        Self {
            x,
            y,
            values: vec![0.0; x.len() * y.len()],
            measure,
        }
    }

    pub fn x_grid(&self) -> &Grid1D {
        &self.x
    }

    pub fn y_grid(&self) -> &Grid1D {
        &self.y
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.x.len() + ix]
    }

    pub fn row(&self, iy: usize) -> &[f64] {
        let nx = self.x.len();
        &self.values[iy * nx..(iy + 1) * nx]
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (Some((ix, tx)), Some((iy, ty))) = (self.x.locate(x), self.y.locate(y)) else {
            return 0.0;
        };
        let nx = self.x.len();
        let base = iy * nx + ix;
        let v00 = self.values[base];
        let v10 = self.values[base + 1];
        let v01 = self.values[base + nx];
        let v11 = self.values[base + nx + 1];
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    /// ∫ρ under the declared measure (2D trapezoid).
    pub fn mass(&self) -> f64 {
        self.measure.factor()
            * trapezoid_2d(&self.values, self.x.len(), self.x.spacing(), self.y.spacing())
    }

    /// Rescales so that [`Density2D::mass`] is 1.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m.abs() > 0.0) {
            return Err(TomoError::InvalidState("density has zero mass".into()));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(self)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Fails if any value is below `−tolerance`.
    pub fn check_classical(&self, tolerance: f64) -> Result<()> {
        let min = self.min_value();
        if min < -tolerance {
            return Err(TomoError::InvalidState(format!(
                "classical density has negative value {min:.3e}"
            )));
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &Density2D) -> bool {
        self.x.same_as(&other.x) && self.y.same_as(&other.y)
    }

    /// ‖self − reference‖₂ / ‖reference‖₂ over the grid samples.
    pub fn relative_l2(&self, reference: &Density2D) -> Result<f64> {
        if !self.same_grid(reference) {
            return Err(TomoError::GridMismatch("densities on different grids".into()));
        }
        Ok(relative_l2(&self.values, &reference.values))
    }

    pub fn max_abs_diff(&self, other: &Density2D) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(TomoError::GridMismatch("densities on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn scaled(&self, s: f64) -> Density2D {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Pointwise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Density2D, b: f64) -> Result<Density2D> {
        if !self.same_grid(other) {
            return Err(TomoError::GridMismatch("densities on different grids".into()));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v = a * *v + b * w;
        }
        Ok(out)
    }
}

pub fn relative_l2(values: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = values
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Projection table ρ_θ(x′), angle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    angles: Vec<f64>,
    offsets: Grid1D,
    values: Vec<f64>,
    measure: Measure,
}

impl Sinogram {
    pub fn new(angles: Vec<f64>, offsets: Grid1D, values: Vec<f64>, measure: Measure) -> Result<Self> {
        if values.len() != angles.len() * offsets.len() {
            return Err(TomoError::GridMismatch(format!(
                "{} values for {} angles x {} offsets",
                values.len(),
                angles.len(),
                offsets.len()
            )));
        }
        if let Some(bad) = angles.iter().find(|a| !a.is_finite()) {
            return Err(TomoError::InvalidArgument(format!("non-finite angle {bad}")));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(TomoError::InvalidArgument(format!("non-finite sinogram value {bad}")));
        }
        Ok(Self {
            angles,
            offsets,
            values,
            measure,
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn offsets(&self) -> &Grid1D {
        &self.offsets
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.offsets.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// ∫ρ_θ(x′)dx′ for row `i`.
    pub fn row_mass(&self, i: usize) -> f64 {
        trapezoid(self.row(i), self.offsets.spacing())
    }

    /// Largest |row − row 0| relative to the peak of row 0.
    pub fn max_row_deviation(&self) -> f64 {
        let first = self.row(0);
        let peak = first.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 1..self.angles.len() {
            for (a, b) in self.row(i).iter().zip(first) {
                worst = worst.max((a - b).abs());
            }
        }
        if peak > 0.0 {
            worst / peak
        } else {
            worst
        }
    }

    /// Pointwise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Sinogram, b: f64) -> Result<Sinogram> {
        if self.angles != other.angles || !self.offsets.same_as(&other.offsets) {
            return Err(TomoError::GridMismatch("sinograms on different grids".into()));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v = a * *v + b * w;
        }
        Ok(out)
    }
}

/// `n` angles `(j + shift)·π/n`. `shift = 0` starts at θ = 0; `shift = 0.5`
/// keeps every angle away from sinθ = 0.
pub fn uniform_angles(n: usize, shift: f64) -> Vec<f64> {
    (0..n).map(|j| (j as f64 + shift) * PI / n as f64).collect()
}

/// Periodic trapezoid weights for ∫₀^π dθ over sorted angles in [0, π).
pub fn angle_weights(angles: &[f64]) -> Result<Vec<f64>> {
    let n = angles.len();
    if n < 2 {
        return Err(TomoError::TooFewAngles { got: n, min: 2 });
    }
    let sorted = angles.windows(2).all(|w| w[1] > w[0]);
    if !sorted || angles[0] < 0.0 || angles[n - 1] >= PI {
        return Err(TomoError::InvalidArgument(
            "angles must be strictly increasing within [0, pi)".into(),
        ));
    }
    Ok((0..n)
        .map(|j| {
            let next = if j + 1 < n { angles[j + 1] } else { angles[0] + PI };
            let prev = if j > 0 { angles[j - 1] } else { angles[n - 1] - PI };
            0.5 * (next - prev)
        })
        .collect())
}

/// Line integrals of `density` along x′ = x cosθ + y sinθ.
pub fn forward_radon(density: &Density2D, angles: &[f64], offsets: &Grid1D) -> Result<Sinogram> {
    check_support(density, angles, offsets)?;
    let xg = density.x_grid();
    let yg = density.y_grid();
    let ds = xg.spacing().min(yg.spacing());
    let reach = xg.max_abs().hypot(yg.max_abs());
    let half_steps = (reach / ds).ceil() as i64;
    let factor = density.measure().factor();
    let points = offsets.points();

    let rows: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&theta| {
            let (s, c) = theta.sin_cos();
            points
                .iter()
                .map(|&xp| {
                    // Endpoints fall outside the support, so plain sums are the trapezoid rule.
                    let mut acc = 0.0;
                    for k in -half_steps..=half_steps {
                        let t = k as f64 * ds;
                        acc += density.sample(xp * c - t * s, xp * s + t * c);
                    }
                    factor * acc * ds
                })
                .collect()
        })
        .collect();
    Sinogram::new(angles.to_vec(), *offsets, rows.concat(), density.measure())
}

fn check_support(density: &Density2D, angles: &[f64], offsets: &Grid1D) -> Result<()> {
    let peak = density.max_abs();
    if peak == 0.0 {
        return Ok(());
    }
    let xs = density.x_grid().points();
    let ys = density.y_grid().points();
    let mut significant = Vec::new();
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            if density.get(ix, iy).abs() > SUPPORT_THRESHOLD * peak {
                significant.push((x, y));
            }
        }
    }
    let slack = 0.5 * offsets.spacing();
    for &theta in angles {
        let (s, c) = theta.sin_cos();
        for &(x, y) in &significant {
            let xp = x * c + y * s;
            if xp > offsets.max() + slack || xp < offsets.min() - slack {
                return Err(TomoError::SupportClipped {
                    theta,
                    reach: xp.abs(),
                    limit: if xp > 0.0 { offsets.max() } else { offsets.min().abs() },
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMethod {
    /// ε-regularized principal-value kernel applied to ∂ρ_θ/∂x′.
    Pv,
    /// Band-limited |k| filter by FFT.
    Ramp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseRadonOptions {
    pub method: FilterMethod,
    /// PV regularization width; `None` ties it to the offset spacing.
    pub epsilon: Option<f64>,
    pub leak_tolerance: f64,
    /// Cosine window on the ramp (FFT route only).
    pub apodize: bool,
    /// Replace negative output values with zero.
    pub clip_negative: bool,
}

impl Default for InverseRadonOptions {
    fn default() -> Self {
        Self {
            method: FilterMethod::Pv,
            epsilon: None,
            leak_tolerance: DEFAULT_LEAK_TOLERANCE,
            apodize: false,
            clip_negative: false,
        }
    }
}

impl InverseRadonOptions {
    pub fn with_method(method: FilterMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

/// Each sinogram row passed through the ramp, i.e. Ramp[ρ_θ](x′) on the
/// offset nodes. The PV route returns I_ε/(2π) so both methods share a scale.
pub fn filter_rows(sino: &Sinogram, options: &InverseRadonOptions) -> Result<Vec<Vec<f64>>> {
    let offsets = sino.offsets();
    for i in 0..sino.angles().len() {
        check_decay(sino.row(i), options.leak_tolerance)?;
    }
    match options.method {
        FilterMethod::Pv => {
            let kernel = match options.epsilon {
                Some(e) => PvKernel::new(e)?,
                None => PvKernel::for_grid(offsets),
            };
            (0..sino.angles().len())
                .into_par_iter()
                .map(|i| {
                    let filter = PvFilter::new(sino.row(i), offsets, options.leak_tolerance)?;
                    Ok(filter
                        .eval_on_grid(kernel)
                        .into_iter()
                        .map(|v| v / (2.0 * PI))
                        .collect())
                })
                .collect()
        }
        FilterMethod::Ramp => {
            let ramp = RampFilter::new(
                offsets,
                RampOptions {
                    apodize: options.apodize,
                    ..RampOptions::default()
                },
            )?;
            (0..sino.angles().len())
                .into_par_iter()
                .map(|i| ramp.apply(sino.row(i)))
                .collect()
        }
    }
}

/// Filtered back-projection onto `out_x × out_y`.
pub fn inverse_radon(
    sino: &Sinogram,
    out_x: &Grid1D,
    out_y: &Grid1D,
    options: &InverseRadonOptions,
) -> Result<Density2D> {
    let n_angles = sino.angles().len();
    if n_angles < MIN_ANGLES {
        return Err(TomoError::TooFewAngles {
            got: n_angles,
            min: MIN_ANGLES,
        });
    }
    let weights = angle_weights(sino.angles())?;
    let filtered = filter_rows(sino, options)?;
    let offsets = *sino.offsets();
    let prefactor = sino.measure().ramp_prefactor();
    let trig: Vec<(f64, f64)> = sino.angles().iter().map(|t| t.sin_cos()).collect();
    let xs = out_x.points();
    let ys = out_y.points();

    let mut values = vec![0.0; xs.len() * ys.len()];
    values
        .par_chunks_mut(xs.len())
        .zip(ys.par_iter())
        .for_each(|(row, &y)| {
            for (cell, &x) in row.iter_mut().zip(&xs) {
                let mut acc = 0.0;
                for ((profile, &(s, c)), w) in filtered.iter().zip(&trig).zip(&weights) {
                    acc += w * lerp_at(profile, &offsets, x * c + y * s);
                }
                *cell = prefactor * acc;
            }
        });
    if options.clip_negative {
        values.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Density2D::new(*out_x, *out_y, values, sino.measure())
}

/// ρ(q,p) = P(q|p)·P(p) for a classical phase-space (or plane) density,
/// with x the conditioned variable q and y the conditioning variable p.
#[derive(Debug, Clone)]
pub struct ConditionalFactorization {
    q: Grid1D,
    p: Grid1D,
    measure: Measure,
    marginal: Vec<f64>,
    conditional: Vec<f64>,
    empty: Vec<bool>,
}

impl ConditionalFactorization {
    pub fn q_grid(&self) -> &Grid1D {
        &self.q
    }

    pub fn p_grid(&self) -> &Grid1D {
        &self.p
    }

    /// P(p) on the p grid; integrates to 1 over dp for a normalized density.
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    /// Fibers whose marginal fell at or below the threshold.
    pub fn empty_fibers(&self) -> &[bool] {
        &self.empty
    }

    /// P(q|p_j) on the q grid; integrates to 1 over dq.
    pub fn conditional(&self, j: usize) -> Result<&[f64]> {
        if self.empty[j] {
            return Err(TomoError::EmptyFiber {
                index: j,
                marginal: self.marginal[j],
            });
        }
        let nq = self.q.len();
        Ok(&self.conditional[j * nq..(j + 1) * nq])
    }

    /// ∫q P(q|p_j) dq.
    pub fn conditional_mean(&self, j: usize) -> Result<f64> {
        let row = self.conditional(j)?;
        let weighted: Vec<f64> = row.iter().zip(self.q.points()).map(|(v, q)| v * q).collect();
        Ok(trapezoid(&weighted, self.q.spacing()))
    }

    /// Rebuilds the density from the two factors; empty fibers come back as 0.
    pub fn reassemble(&self) -> Density2D {
        let nq = self.q.len();
        let factor = self.measure.factor();
        let mut values = vec![0.0; self.conditional.len()];
        for (j, &pj) in self.marginal.iter().enumerate() {
            if self.empty[j] {
                continue;
            }
            for i in 0..nq {
                values[j * nq + i] = self.conditional[j * nq + i] * pj / factor;
            }
        }
        Density2D {
            x: self.q,
            y: self.p,
            values,
            measure: self.measure,
        }
    }
}

pub fn conditional_factorize(density: &Density2D, threshold: f64) -> Result<ConditionalFactorization> {
    density.check_classical(1e-12 * density.max_abs())?;
    let q = *density.x_grid();
    let p = *density.y_grid();
    let factor = density.measure().factor();
    let dq = q.spacing();
    let nq = q.len();
    let mut marginal = Vec::with_capacity(p.len());
    let mut conditional = vec![0.0; density.values().len()];
    let mut empty = Vec::with_capacity(p.len());
    for j in 0..p.len() {
        let row = density.row(j);
        let pj = factor * trapezoid(row, dq);
        marginal.push(pj);
        let is_empty = pj <= threshold;
        empty.push(is_empty);
        if !is_empty {
            for i in 0..nq {
                conditional[j * nq + i] = factor * row[i] / pj;
            }
        }
    }
    Ok(ConditionalFactorization {
        q,
        p,
        measure: density.measure(),
        marginal,
        conditional,
        empty,
    })
}
