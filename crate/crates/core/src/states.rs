//! Ground-truth states and phantoms.
//!
//! Continuous-variable states are held as mixtures of pure states written in
//! the oscillator (Fock) basis, truncated at [`DEFAULT_NMAX`]. The annihilation
//! operator is a = (x̂ + ip̂)/√2, so a coherent state |α⟩ has
//! ⟨X̂_θ⟩ = √2·Re(α e^{−iθ}).
//!
//! Specs are read from JSON with a `kind` tag, for example
//! `{"kind": "coherent", "alpha": [0.8, 0.5]}` or
//! `{"kind": "mixed", "components": [{"weight": 0.5, "state": {"kind": "vacuum"}}, ...]}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::fractional::OscillatorBasis;
use crate::mub_continuous::{Provenance, QuadratureDataset};
use crate::numerics::Grid1D;
use crate::qudit::{PrimeDim, QuditState};
use crate::radon::{Density2D, Measure, Sinogram};
use crate::wigner::{DensityKernel, OperatorKernel};

pub const DEFAULT_NMAX: usize = 60;

/// Fine-grid refinement used by the quadrature sampler.
const SAMPLER_REFINEMENT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub state: StateSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Blob {
    /// Gaussian with standard deviations `sigma` along axes rotated by `angle`.
    Gaussian {
        center: [f64; 2],
        sigma: [f64; 2],
        #[serde(default)]
        angle: f64,
        weight: f64,
    },
    /// Uniform ellipse with semi-axes `axes` rotated by `angle`.
    Ellipse {
        center: [f64; 2],
        axes: [f64; 2],
        #[serde(default)]
        angle: f64,
        weight: f64,
    },
}

impl Blob {
    fn weight(&self) -> f64 {
        match self {
            Blob::Gaussian { weight, .. } | Blob::Ellipse { weight, .. } => *weight,
        }
    }

    /// Unnormalized profile at (x, y).
    fn profile(&self, x: f64, y: f64) -> f64 {
        let (center, angle) = match self {
            Blob::Gaussian { center, angle, .. } | Blob::Ellipse { center, angle, .. } => (center, *angle),
        };
        let (s, c) = angle.sin_cos();
        let (dx, dy) = (x - center[0], y - center[1]);
        let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
        match self {
            Blob::Gaussian { sigma, .. } => {
                (-0.5 * ((u / sigma[0]).powi(2) + (v / sigma[1]).powi(2))).exp()
            }
            Blob::Ellipse { axes, .. } => {
                if (u / axes[0]).powi(2) + (v / axes[1]).powi(2) <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width of a box that holds the blob (4σ for Gaussians).
    fn reach(&self) -> ([f64; 2], f64) {
        match self {
            Blob::Gaussian { center, sigma, .. } => (*center, 4.0 * sigma[0].max(sigma[1])),
            Blob::Ellipse { center, axes, .. } => (*center, axes[0].max(axes[1])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Vacuum,
    Fock { n: usize },
    Coherent { alpha: Complex64 },
    Thermal { nbar: f64 },
    Cat { alpha: Complex64, parity: Parity },
    Mixed { components: Vec<Component> },
    Phantom { blobs: Vec<Blob> },
    QuditPure { amplitudes: Vec<Complex64> },
    QuditRandomMixed { d: u32, seed: u64 },
}

impl StateSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            StateSpec::Vacuum => "vacuum",
            StateSpec::Fock { .. } => "fock",
            StateSpec::Coherent { .. } => "coherent",
            StateSpec::Thermal { .. } => "thermal",
            StateSpec::Cat { .. } => "cat",
            StateSpec::Mixed { .. } => "mixed",
            StateSpec::Phantom { .. } => "phantom",
            StateSpec::QuditPure { .. } => "qudit_pure",
            StateSpec::QuditRandomMixed { .. } => "qudit_random_mixed",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state specs always serialize")
    }

    /// The two-Gaussian phantom used by the CT demos.
    pub fn two_blob_phantom() -> Self {
        StateSpec::Phantom {
            blobs: vec![
                Blob::Gaussian {
                    center: [-0.35, 0.2],
                    sigma: [0.15, 0.15],
                    angle: 0.0,
                    weight: 0.6,
                },
                Blob::Gaussian {
                    center: [0.4, -0.3],
                    sigma: [0.1, 0.1],
                    angle: 0.0,
                    weight: 0.4,
                },
            ],
        }
    }

    /// Fock-basis eigen-decomposition of a continuous-variable spec.
    pub fn fock_mixture(&self) -> Result<FockMixture> {
        self.fock_mixture_with(DEFAULT_NMAX)
    }

    pub fn fock_mixture_with(&self, nmax: usize) -> Result<FockMixture> {
        match self {
            StateSpec::Vacuum => Ok(FockMixture::pure(vec![Complex64::new(1.0, 0.0)], 0.0)),
            StateSpec::Fock { n } => {
                if *n > nmax {
                    return Err(TomoError::InvalidState(format!("Fock level {n} exceeds nmax {nmax}")));
                }
                let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
                c[*n] = Complex64::new(1.0, 0.0);
                Ok(FockMixture::pure(c, 0.0))
            }
            StateSpec::Coherent { alpha } => {
                let c = coherent_coefficients(*alpha, nmax);
                Ok(normalized_pure(c))
            }
            StateSpec::Cat { alpha, parity } => {
                let mut c = coherent_coefficients(*alpha, nmax);
                let keep = match parity {
                    Parity::Even => 0,
                    Parity::Odd => 1,
                };
                for (n, v) in c.iter_mut().enumerate() {
                    if n % 2 != keep {
                        *v = Complex64::new(0.0, 0.0);
                    }
                }
                // The surviving coefficients are those of |α⟩ ± |−α⟩ up to scale;
                // the tail is measured against the untruncated norm.
                let r2 = alpha.norm_sqr();
                let full = match parity {
                    Parity::Even => (-r2).exp() * r2.cosh(),
                    Parity::Odd => (-r2).exp() * r2.sinh(),
                };
                if full <= 0.0 {
                    return Err(TomoError::InvalidState("odd cat with alpha = 0 has no norm".into()));
                }
                let kept: f64 = c.iter().map(|v| v.norm_sqr()).sum();
                let tail = (1.0 - kept / full).max(0.0);
                let norm = kept.sqrt();
                Ok(FockMixture::pure(c.into_iter().map(|v| v / norm).collect(), tail))
            }
            StateSpec::Thermal { nbar } => {
                if !(*nbar >= 0.0 && nbar.is_finite()) {
                    return Err(TomoError::InvalidState(format!("thermal occupation {nbar} must be >= 0")));
                }
                let ratio = nbar / (nbar + 1.0);
                let probs: Vec<f64> = (0..=nmax).map(|n| ratio.powi(n as i32) / (nbar + 1.0)).collect();
                let kept: f64 = probs.iter().sum();
                let terms = probs
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(n, p)| {
                        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
                        c[n] = Complex64::new(1.0, 0.0);
                        (p / kept, c)
                    })
                    .collect();
                Ok(FockMixture {
                    terms,
                    tail_mass: ratio.powi(nmax as i32 + 1),
                })
            }
            StateSpec::Mixed { components } => {
                if components.is_empty() {
                    return Err(TomoError::InvalidState("empty mixture".into()));
                }
                if components.iter().any(|c| !(c.weight >= 0.0)) {
                    return Err(TomoError::InvalidState("mixture weights must be >= 0".into()));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(TomoError::InvalidState(format!("mixture weights sum to {total}")));
                }
                let mut terms = Vec::new();
                let mut tail = 0.0;
                for comp in components {
                    let sub = comp.state.fock_mixture_with(nmax)?;
                    tail += comp.weight * sub.tail_mass;
                    terms.extend(sub.terms.into_iter().map(|(w, c)| (w * comp.weight, c)));
                }
                Ok(FockMixture {
                    terms,
                    tail_mass: tail,
                })
            }
            other => Err(TomoError::WrongKind {
                got: other.kind_name(),
                expected: "continuous-variable state",
            }),
        }
    }
}

fn coherent_coefficients(alpha: Complex64, nmax: usize) -> Vec<Complex64> {
    let mut c = Vec::with_capacity(nmax + 1);
    c.push(Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0));
    for n in 1..=nmax {
        let prev = c[n - 1];
        c.push(prev * alpha / (n as f64).sqrt());
    }
    c
}

fn normalized_pure(c: Vec<Complex64>) -> FockMixture {
    let kept: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    let norm = kept.sqrt();
    FockMixture::pure(c.into_iter().map(|v| v / norm).collect(), (1.0 - kept).max(0.0))
}

/// Σ_k w_k |φ_k⟩⟨φ_k| with each φ_k given by Fock coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FockMixture {
    pub terms: Vec<(f64, Vec<Complex64>)>,
    /// Probability discarded by the truncation before renormalization.
    pub tail_mass: f64,
}

impl FockMixture {
    fn pure(c: Vec<Complex64>, tail_mass: f64) -> Self {
        Self {
            terms: vec![(1.0, c)],
            tail_mass,
        }
    }

    pub fn max_level(&self) -> usize {
        self.terms.iter().map(|(_, c)| c.len() - 1).max().unwrap_or(0)
    }

    /// Σ_n c_n e^{−inθ} ψ_n(x_i) for one term: the wave function of the
    /// rotated quadrature, ⟨x′,θ|φ⟩ = ⟨x′|U(θ)|φ⟩.
    fn rotated_amplitudes(c: &[Complex64], basis: &OscillatorBasis, theta: f64) -> Vec<Complex64> {
        let m = basis.grid().len();
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        for (n, cn) in c.iter().enumerate() {
            if cn.norm_sqr() == 0.0 {
                continue;
            }
            let coef = cn * Complex64::from_polar(1.0, -(n as f64) * theta);
            for (o, v) in out.iter_mut().zip(basis.psi(n)) {
                *o += coef * v;
            }
        }
        out
    }

    /// ρ_θ(x′) on `offsets`.
    pub fn quadrature_density(&self, theta: f64, basis: &OscillatorBasis) -> Vec<f64> {
        let m = basis.grid().len();
        let mut out = vec![0.0; m];
        for (w, c) in &self.terms {
            for (o, a) in out.iter_mut().zip(Self::rotated_amplitudes(c, basis, theta)) {
                *o += w * a.norm_sqr();
            }
        }
        out
    }
}

pub fn realize_kernel(spec: &StateSpec, grid: &Grid1D) -> Result<DensityKernel> {
    let mix = spec.fock_mixture()?;
    let basis = OscillatorBasis::new(*grid, mix.max_level());
    let n = grid.len();
    let vectors: Vec<(f64, Vec<Complex64>)> = mix
        .terms
        .iter()
        .map(|(w, c)| (*w, FockMixture::rotated_amplitudes(c, &basis, 0.0)))
        .collect();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    vectors
                        .iter()
                        .map(|(w, v)| v[i] * v[j].conj() * *w)
                        .sum()
                })
                .collect()
        })
        .collect();
    let kernel = OperatorKernel::new(*grid, rows.concat())?;
    DensityKernel::new(kernel.hermitian_part())
}

pub fn realize_phantom(spec: &StateSpec, x: &Grid1D, y: &Grid1D) -> Result<Density2D> {
    let StateSpec::Phantom { blobs } = spec else {
        return Err(TomoError::WrongKind {
            got: spec.kind_name(),
            expected: "phantom",
        });
    };
    if blobs.is_empty() {
        return Err(TomoError::InvalidState("phantom has no blobs".into()));
    }
    let mut total = Density2D::zeros(*x, *y, Measure::PlainDxDy);
    for blob in blobs {
        let (center, reach) = blob.reach();
        if center[0] - reach < x.min()
            || center[0] + reach > x.max()
            || center[1] - reach < y.min()
            || center[1] + reach > y.max()
        {
            return Err(TomoError::InvalidState(format!(
                "blob at ({}, {}) extends past the grid",
                center[0], center[1]
            )));
        }
        if !(blob.weight() >= 0.0) {
            return Err(TomoError::InvalidState("blob weight must be >= 0".into()));
        }
        let part = Density2D::from_fn(*x, *y, Measure::PlainDxDy, |u, v| blob.profile(u, v));
        let mass = part.mass();
        if !(mass > 0.0) {
            return Err(TomoError::InvalidState("blob covers no grid points".into()));
        }
        total = total.combine(1.0, &part, blob.weight() / mass)?;
    }
    Ok(total)
}

pub fn realize_qudit(spec: &StateSpec) -> Result<QuditState> {
    match spec {
        StateSpec::QuditPure { amplitudes } => QuditState::pure(amplitudes),
        StateSpec::QuditRandomMixed { d, seed } => Ok(QuditState::random_mixed(PrimeDim::new(*d)?, *seed)),
        other => Err(TomoError::WrongKind {
            got: other.kind_name(),
            expected: "qudit state",
        }),
    }
}

/// Exact ρ_θ(x′) for every angle, as probability densities in x′.
pub fn exact_quadratures(spec: &StateSpec, angles: &[f64], offsets: &Grid1D) -> Result<QuadratureDataset> {
    let mix = spec.fock_mixture()?;
    let basis = OscillatorBasis::new(*offsets, mix.max_level());
    let rows: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&t| mix.quadrature_density(t, &basis))
        .collect();
    let sino = Sinogram::new(angles.to_vec(), *offsets, rows.concat(), Measure::DqDpOver2Pi)?;
    QuadratureDataset::new(sino, Provenance::Exact)
}

/// Histogrammed homodyne samples: `shots` draws per angle by inverse CDF on a
/// grid 8× finer than `offsets`, binned into cells of width Δx′ centred on the
/// offset nodes. The generator is ChaCha8 seeded by `seed`; angles are sampled
/// in order.
pub fn sample_quadratures(
    spec: &StateSpec,
    angles: &[f64],
    offsets: &Grid1D,
    shots: u64,
    seed: u64,
) -> Result<QuadratureDataset> {
    if shots == 0 {
        return Err(TomoError::InvalidArgument("shots must be at least 1".into()));
    }
    let mix = spec.fock_mixture()?;
    let dx = offsets.spacing();
    let fine_n = (offsets.len() - 1) * SAMPLER_REFINEMENT + SAMPLER_REFINEMENT + 1;
    let fine = Grid1D::new(offsets.min() - 0.5 * dx, offsets.max() + 0.5 * dx, fine_n)?;
    let basis = OscillatorBasis::new(fine, mix.max_level());
    let cdfs: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&t| cumulative(&mix.quadrature_density(t, &basis), fine.spacing()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = offsets.len();
    let mut values = Vec::with_capacity(angles.len() * m);
    for cdf in &cdfs {
        let mut counts = vec![0u64; m];
        let total = *cdf.last().expect("non-empty grid");
        for _ in 0..shots {
            let u: f64 = rng.gen::<f64>() * total;
            let k = cdf.partition_point(|c| *c < u).clamp(1, cdf.len() - 1);
            let (c0, c1) = (cdf[k - 1], cdf[k]);
            let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
            let x = fine.point(k - 1) + t * fine.spacing();
            let bin = (((x - offsets.min()) / dx).round().max(0.0) as usize).min(m - 1);
            counts[bin] += 1;
        }
        values.extend(counts.iter().map(|&c| c as f64 / (shots as f64 * dx)));
    }
    let sino = Sinogram::new(angles.to_vec(), *offsets, values, Measure::DqDpOver2Pi)?;
    QuadratureDataset::new(sino, Provenance::Sampled { shots })
}

/// Running trapezoid integral, starting at 0.
fn cumulative(density: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(density.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in density.windows(2) {
        acc += 0.5 * (w[0].max(0.0) + w[1].max(0.0)) * dx;
        out.push(acc);
    }
    out
}

/// The states every reconstruction path is checked against.
pub fn test_library() -> Vec<(&'static str, StateSpec)> {
    let vacuum = StateSpec::Vacuum;
    let fock1 = StateSpec::Fock { n: 1 };
    vec![
        ("vacuum", vacuum.clone()),
        ("fock1", fock1.clone()),
        ("fock2", StateSpec::Fock { n: 2 }),
        (
            "coherent",
            StateSpec::Coherent {
                alpha: Complex64::new(0.8, 0.5),
            },
        ),
        ("thermal", StateSpec::Thermal { nbar: 0.5 }),
        (
            "even_cat",
            StateSpec::Cat {
                alpha: Complex64::new(1.2, 0.0),
                parity: Parity::Even,
            },
        ),
        (
            "mixed01",
            StateSpec::Mixed {
                components: vec![
                    Component {
                        weight: 0.5,
                        state: vacuum,
                    },
                    Component {
                        weight: 0.5,
                        state: fock1,
                    },
                ],
            },
        ),
    ]
}

/// Analytic quadrature density of a coherent state: a unit Gaussian of
/// variance 1/2 centred at √2·Re(α e^{−iθ}).
pub fn coherent_quadrature_density(alpha: Complex64, theta: f64, xprime: f64) -> f64 {
    let mean = 2f64.sqrt() * (alpha * Complex64::from_polar(1.0, -theta)).re;
    (-(xprime - mean).powi(2)).exp() / PI.sqrt()
}
