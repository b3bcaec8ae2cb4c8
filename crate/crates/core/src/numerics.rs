//! Shared numerical substrate: uniform grids, quadrature, finite differences,
//! the ε-regularized principal-value kernel and the FFT ramp filter.
//!
//! Two filtering routes are provided for a projection profile f(x′):
//!
//! * [`pv_convolve`] evaluates I_ε(α) = −∫ f′(x′) g_ε(x′ − α) dx′ with
//!   g_ε(ξ) = 2ξ/(ξ² + ε²). The derivative is sampled with centered
//!   differences and interpolated linearly between nodes; each segment is then
//!   integrated against g_ε in closed form (product integration), so the
//!   kernel singularity never has to be resolved by the grid. As ε → 0 this
//!   tends to −2·PV∫ f′(x′)/(x′ − α) dx′.
//! * [`ramp_filter`] applies the band-limited |k| filter by FFT convolution on
//!   a zero-padded grid. Its output is (1/2π)∫|k| f̂(k) e^{ikx} dk, which is
//!   I₀/(2π).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};

/// Regularization width used when the caller does not pick one, as a fraction
/// of the offset spacing.
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.01;

/// Relative edge amplitude above which a profile is treated as truncated.
pub const DEFAULT_LEAK_TOLERANCE: f64 = 1e-3;

/// Minimum number of samples accepted by the ramp filter.
pub const MIN_RAMP_SAMPLES: usize = 8;

/// Uniformly spaced sample points `min + i·Δ`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    min: f64,
    max: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(TomoError::InvalidGrid(format!("need n >= 2, got {n}")));
        }
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(TomoError::InvalidGrid(format!(
                "need finite max > min, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max, n })
    }

    /// Grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn extent(&self) -> f64 {
        self.max - self.min
    }

    /// Largest |x| on the grid.
    pub fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }

    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        if i + 1 == self.n {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Cell containing `x` as `(i, t)` with `x = point(i) + t·Δ`, `0 <= t <= 1`.
    /// `None` outside `[min, max]`.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(x >= self.min && x <= self.max) {
            return None;
        }
        let u = (x - self.min) / self.spacing();
        let i = (u.floor() as usize).min(self.n - 2);
        Some((i, u - i as f64))
    }

    /// Index of the node equal to `x` within `tol` spacings, if any.
    pub fn node_index(&self, x: f64, tol: f64) -> Option<usize> {
        let u = (x - self.min) / self.spacing();
        let r = u.round();
        if r < 0.0 || r > (self.n - 1) as f64 || (u - r).abs() > tol {
            None
        } else {
            Some(r as usize)
        }
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        let tol = 1e-12 * self.extent().max(other.extent());
        self.n == other.n
            && (self.min - other.min).abs() <= tol
            && (self.max - other.max).abs() <= tol
    }
}

/// Linear interpolation of grid samples; zero outside the grid.
pub fn lerp_at(values: &[f64], grid: &Grid1D, x: f64) -> f64 {
    match grid.locate(x) {
        Some((i, t)) => values[i] * (1.0 - t) + values[i + 1] * t,
        None => 0.0,
    }
}

pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])) * dx,
    }
}

pub fn trapezoid_complex(values: &[Complex64], dx: f64) -> Complex64 {
    match values.len() {
        0 | 1 => Complex64::new(0.0, 0.0),
        n => (values[1..n - 1].iter().sum::<Complex64>() + 0.5 * (values[0] + values[n - 1])) * dx,
    }
}

/// Trapezoid weight of node `i` in a rule over `n` nodes.
#[inline]
pub fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// 2D trapezoid rule over row-major samples (`rows` × `cols`).
pub fn trapezoid_2d(values: &[f64], cols: usize, dx: f64, dy: f64) -> f64 {
    let rows = values.len() / cols;
    let mut total = 0.0;
    for r in 0..rows {
        let wr = trapezoid_weight(r, rows);
        let row = &values[r * cols..(r + 1) * cols];
        let s: f64 = row
            .iter()
            .enumerate()
            .map(|(c, v)| trapezoid_weight(c, cols) * v)
            .sum();
        total += wr * s;
    }
    total * dx * dy
}

/// Centered fourth-order differences in the interior, second-order next to
/// the ends.
pub fn derivative(samples: &[f64], dx: f64) -> Vec<f64> {
    let n = samples.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let s = (samples[1] - samples[0]) / dx;
            d[0] = s;
            d[1] = s;
        }
        return d;
    }
    d[0] = (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * samples[n - 1] - 4.0 * samples[n - 2] + samples[n - 3]) / (2.0 * dx);
    for i in 1..n - 1 {
        d[i] = if i >= 2 && i + 2 < n {
            (samples[i - 2] - 8.0 * samples[i - 1] + 8.0 * samples[i + 1] - samples[i + 2]) / (12.0 * dx)
        } else {
            (samples[i + 1] - samples[i - 1]) / (2.0 * dx)
        };
    }
    d
}

/// Fails with [`TomoError::BoundaryLeak`] when the end samples are not small
/// compared to the peak.
pub fn check_decay(samples: &[f64], tolerance: f64) -> Result<()> {
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || samples.is_empty() {
        return Ok(());
    }
    let edge = samples[0].abs().max(samples[samples.len() - 1].abs()) / peak;
    if edge > tolerance {
        return Err(TomoError::BoundaryLeak { edge, tolerance });
    }
    Ok(())
}

/// The regularized principal-value kernel g_ε(ξ) = 2ξ/(ξ² + ε²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvKernel {
    epsilon: f64,
}

impl PvKernel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(TomoError::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    /// Kernel with ε tied to the offset spacing of `grid`.
    pub fn for_grid(grid: &Grid1D) -> Self {
        Self {
            epsilon: DEFAULT_EPSILON_FRACTION * grid.spacing(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

pub fn pv_g(kernel: PvKernel, xi: f64) -> f64 {
    let e = kernel.epsilon;
    2.0 * xi / (xi * xi + e * e)
}

/// A profile prepared for repeated principal-value evaluation.
#[derive(Debug, Clone)]
pub struct PvFilter {
    grid: Grid1D,
    slope: Vec<f64>,
}

impl PvFilter {
    /// Checks the decay precondition and samples the derivative.
    pub fn new(samples: &[f64], grid: &Grid1D, leak_tolerance: f64) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(TomoError::GridMismatch(format!(
                "{} samples on a {}-point grid",
                samples.len(),
                grid.len()
            )));
        }
        check_decay(samples, leak_tolerance)?;
        Ok(Self {
            grid: *grid,
            slope: derivative(samples, grid.spacing()),
        })
    }

    /// I_ε(α) = −∫ f′(x′) g_ε(x′ − α) dx′.
    ///
    /// On the segment [x_j, x_{j+1}] write f′ = A + s·u with u = x′ − α; then
    /// ∫ (A + s u) 2u/(u² + ε²) du = A·ln(u² + ε²) + 2s·(u − ε·atan(u/ε)).
    pub fn eval(&self, kernel: PvKernel, alpha: f64) -> f64 {
        let eps = kernel.epsilon;
        let h = self.grid.spacing();
        let x0 = self.grid.min();
        let n = self.slope.len();
        let mut total = 0.0;
        let mut u_prev = x0 - alpha;
        let mut log_prev = (u_prev * u_prev + eps * eps).ln();
        let mut atan_prev = (u_prev / eps).atan();
        for j in 0..n - 1 {
            let u_next = x0 + (j + 1) as f64 * h - alpha;
            let log_next = (u_next * u_next + eps * eps).ln();
            let atan_next = (u_next / eps).atan();
            let s = (self.slope[j + 1] - self.slope[j]) / h;
            let a = self.slope[j] - s * u_prev;
            total += a * (log_next - log_prev) + 2.0 * s * (h - eps * (atan_next - atan_prev));
            u_prev = u_next;
            log_prev = log_next;
            atan_prev = atan_next;
        }
        -total
    }

    /// Evaluates at every node of the profile grid.
    pub fn eval_on_grid(&self, kernel: PvKernel) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| self.eval(kernel, self.grid.point(i)))
            .collect()
    }
}

pub fn pv_convolve(samples: &[f64], grid: &Grid1D, kernel: PvKernel, alpha: f64) -> Result<f64> {
    Ok(PvFilter::new(samples, grid, DEFAULT_LEAK_TOLERANCE)?.eval(kernel, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampOptions {
    /// Padded length is the next power of two at or above `padding · n`.
    pub padding: usize,
    /// Multiply the ramp by a cosine window that vanishes at the band edge.
    pub apodize: bool,
}

impl Default for RampOptions {
    fn default() -> Self {
        Self {
            padding: 4,
            apodize: false,
        }
    }
}

/// Band-limited ramp filter for profiles of a fixed length and spacing.
///
/// The spatial kernel is the inverse transform of |k| restricted to the band
/// |k| < π/Δ: h(0) = π/(2Δ²), h(m) = −2/(π m² Δ²) for odd m, zero for even
/// m ≠ 0. Sampling this kernel (rather than sampling |k| on the padded DFT
/// grid) keeps the zero-frequency response exact for linear convolution.
pub struct RampFilter {
    n: usize,
    dx: f64,
    spectrum: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl RampFilter {
    pub fn new(grid: &Grid1D, options: RampOptions) -> Result<Self> {
        let n = grid.len();
        if n < MIN_RAMP_SAMPLES {
            return Err(TomoError::GridTooCoarse {
                n,
                min: MIN_RAMP_SAMPLES,
            });
        }
        let padded = (options.padding.max(2) * n).next_power_of_two();
        let dx = grid.spacing();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);

        let mut kernel = vec![Complex64::new(0.0, 0.0); padded];
        for (k, slot) in kernel.iter_mut().enumerate() {
            let m = if k <= padded / 2 {
                k as i64
            } else {
                k as i64 - padded as i64
            };
            let h = if m == 0 {
                PI / (2.0 * dx * dx)
            } else if m % 2 != 0 {
                -2.0 / (PI * (m * m) as f64 * dx * dx)
            } else {
                0.0
            };
            *slot = Complex64::new(h * dx, 0.0);
        }
        forward.process(&mut kernel);
        let spectrum = kernel
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let window = if options.apodize {
                    let f = k.min(padded - k) as f64 / (padded / 2) as f64;
                    (0.5 * PI * f).cos()
                } else {
                    1.0
                };
                c.re * window
            })
            .collect();
        Ok(Self {
            n,
            dx,
            spectrum,
            forward,
            inverse,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.dx
    }

    pub fn apply(&self, profile: &[f64]) -> Result<Vec<f64>> {
        if profile.len() != self.n {
            return Err(TomoError::GridMismatch(format!(
                "ramp filter built for {} samples, got {}",
                self.n,
                profile.len()
            )));
        }
        let padded = self.spectrum.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); padded];
        for (slot, v) in buf.iter_mut().zip(profile) {
            slot.re = *v;
        }
        self.forward.process(&mut buf);
        for (c, h) in buf.iter_mut().zip(&self.spectrum) {
            *c *= *h;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / padded as f64;
        Ok(buf[..self.n].iter().map(|c| c.re * scale).collect())
    }
}

pub fn ramp_filter(profile: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    if profile.len() != grid.len() {
        return Err(TomoError::GridMismatch(format!(
            "{} samples on a {}-point grid",
            profile.len(),
            grid.len()
        )));
    }
    RampFilter::new(grid, RampOptions::default())?.apply(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &Grid1D, center: f64, width: f64) -> Vec<f64> {
        grid.points()
            .iter()
            .map(|x| (-(x - center).powi(2) / (2.0 * width * width)).exp())
            .collect()
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(1.0, 1.0, 5).is_err());
        assert!(Grid1D::new(2.0, 1.0, 5).is_err());
        let g = Grid1D::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.locate(0.25), Some((2, 0.5)));
        assert_eq!(g.locate(1.0), Some((3, 1.0)));
        assert_eq!(g.locate(1.01), None);
        assert_eq!(g.node_index(0.5, 1e-9), Some(3));
        assert_eq!(g.node_index(0.6, 1e-9), None);
    }

    #[test]
    fn pv_g_examples() {
        let k = PvKernel::new(0.1).unwrap();
        assert_eq!(pv_g(k, 0.0), 0.0);
        assert_eq!(pv_g(PvKernel::new(1.0).unwrap(), 1.0), 1.0);
        let v = pv_g(PvKernel::new(0.01).unwrap(), -0.01);
        assert!((v + 100.0).abs() < 1e-10, "{v}");
        assert!(PvKernel::new(0.0).is_err());
        assert!(PvKernel::new(-1.0).is_err());
    }

    #[test]
    fn pv_convolve_zero_and_leak() {
        let g = Grid1D::symmetric(5.0, 101).unwrap();
        let k = PvKernel::for_grid(&g);
        assert_eq!(pv_convolve(&vec![0.0; 101], &g, k, 0.3).unwrap(), 0.0);
        let flat = vec![1.0; 101];
        assert!(matches!(
            pv_convolve(&flat, &g, k, 0.0),
            Err(TomoError::BoundaryLeak { .. })
        ));
    }

    #[test]
    fn symmetric_bump_gives_positive_center() {
        let g = Grid1D::symmetric(6.0, 241).unwrap();
        let f = gaussian(&g, 0.0, 0.8);
        let v = pv_convolve(&f, &g, PvKernel::for_grid(&g), 0.0).unwrap();
        assert!(v > 0.0);
    }

    #[test]
    fn linear_profile_segment_is_integrated_exactly() {
        // f' linear everywhere => product integration is exact for any ε.
        let g = Grid1D::new(-2.0, 2.0, 41).unwrap();
        let f: Vec<f64> = g.points().iter().map(|x| 0.5 * x * x).collect();
        let filter = PvFilter::new(&f, &g, 10.0).unwrap();
        let eps = 0.3;
        let alpha = 0.17;
        // -∫_{-2}^{2} x · 2(x-α)/((x-α)²+ε²) dx, u = x - α
        let prim = |u: f64| alpha * (u * u + eps * eps).ln() + 2.0 * (u - eps * (u / eps).atan());
        let exact = -(prim(2.0 - alpha) - prim(-2.0 - alpha));
        let got = filter.eval(PvKernel::new(eps).unwrap(), alpha);
        assert!((got - exact).abs() < 1e-9, "{got} vs {exact}");
    }

    #[test]
    fn ramp_requires_eight_samples() {
        let g = Grid1D::new(0.0, 1.0, 7).unwrap();
        assert!(matches!(
            ramp_filter(&[0.0; 7], &g),
            Err(TomoError::GridTooCoarse { n: 7, min: 8 })
        ));
    }

    #[test]
    fn ramp_impulse_response_is_the_discrete_ramp() {
        let g = Grid1D::new(0.0, 63.0 * 0.1, 64).unwrap();
        let dx = g.spacing();
        let mut f = vec![0.0; 64];
        f[32] = 1.0;
        let r = ramp_filter(&f, &g).unwrap();
        assert!((r[32] - PI / (2.0 * dx)).abs() < 1e-9);
        for m in 1..20usize {
            assert!((r[32 + m] - r[32 - m]).abs() < 1e-9, "symmetry at {m}");
            if m % 2 == 1 {
                let expected = -2.0 / (PI * (m * m) as f64 * dx);
                assert!((r[32 + m] - expected).abs() < 1e-9);
                assert!(r[32 + m] < 0.0);
            } else {
                assert!(r[32 + m].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ramp_kills_constant_interior() {
        let g = Grid1D::new(0.0, 10.0, 401).unwrap();
        let r = ramp_filter(&vec![1.0; 401], &g).unwrap();
        // Away from the ends the residual decays like 1/(distance).
        let peak = PI / (2.0 * g.spacing());
        for v in &r[150..250] {
            assert!(v.abs() < 0.01 * peak, "{v}");
        }
    }

    #[test]
    fn apodized_ramp_is_smoother_than_plain() {
        let g = Grid1D::new(0.0, 6.3, 64).unwrap();
        let mut f = vec![0.0; 64];
        f[32] = 1.0;
        let plain = RampFilter::new(&g, RampOptions::default()).unwrap().apply(&f).unwrap();
        let smooth = RampFilter::new(
            &g,
            RampOptions {
                padding: 4,
                apodize: true,
            },
        )
        .unwrap()
        .apply(&f)
        .unwrap();
        assert!(smooth[32] < plain[32]);
        assert!(smooth[32] > 0.0);
    }
}
