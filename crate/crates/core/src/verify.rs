//! Invariant suites run by `tomokit verify`. Each check is small enough to
//! finish in well under a second; the output is deterministic.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Result, TomoError};
use crate::fractional::{
    continuous_mub_overlap, numerical_mub_overlap, quadrature_amplitude, rotation_matrix_element, OscillatorBasis,
};
use crate::mub_continuous::{displacement_coefficient, reconstruct_density_matrix, DmReconstructionOptions};
use crate::numerics::{check_decay, derivative, trapezoid, Grid1D};
use crate::qudit::{
    gram_rank, measurement_probabilities, mub_family, operator_basis, power_identity_check, reconstruct_qudit,
    schwinger_ops, trace_norm_distance, PrimeDim, QuditState,
};
use crate::radon::{forward_radon, inverse_radon, uniform_angles, Density2D, FilterMethod, InverseRadonOptions, Measure};
use crate::states::{exact_quadratures, realize_kernel, test_library, StateSpec};
use crate::wigner::{trace_product, wigner_transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Module {
    Numerics,
    Radon,
    Wigner,
    Fractional,
    MubContinuous,
    QuditMub,
    States,
}

impl Module {
    pub const ALL: [Module; 7] = [
        Module::Numerics,
        Module::Radon,
        Module::Wigner,
        Module::Fractional,
        Module::MubContinuous,
        Module::QuditMub,
        Module::States,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Module::Numerics => "numerics",
            Module::Radon => "radon",
            Module::Wigner => "wigner",
            Module::Fractional => "fractional",
            Module::MubContinuous => "mub-continuous",
            Module::QuditMub => "qudit-mub",
            Module::States => "states",
        }
    }
}

impl FromStr for Module {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        Module::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| TomoError::InvalidArgument(format!("unknown module {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}/{}: {}", self.module, self.name, self.detail)
    }
}

struct Suite {
    module: &'static str,
    checks: Vec<Check>,
}

impl Suite {
    fn new(module: Module) -> Self {
        Self {
            module: module.name(),
            checks: Vec::new(),
        }
    }

    /// Records `value < bound`.
    fn below(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.checks.push(Check {
            module: self.module,
            name: name.into(),
            passed: value < bound,
            detail: format!("{value:.3e} < {bound:.1e}"),
        });
    }

    fn holds(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            module: self.module,
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    /// Records an error from a step that should have succeeded.
    fn run(&mut self, name: &str, f: impl FnOnce(&mut Suite) -> Result<()>) {
        if let Err(e) = f(self) {
            self.holds(name, false, format!("error: {e}"));
        }
    }
}

/// Runs the suite for `module`. `dims` selects qudit dimensions; empty means
/// {2, 3, 5, 7}.
pub fn verify_module(module: Module, dims: &[u32]) -> Vec<Check> {
    let mut s = Suite::new(module);
    match module {
        Module::Numerics => numerics(&mut s),
        Module::Radon => radon(&mut s),
        Module::Wigner => wigner(&mut s),
        Module::Fractional => fractional(&mut s),
        Module::MubContinuous => mub_continuous(&mut s),
        Module::QuditMub => {
            let dims = if dims.is_empty() { &[2, 3, 5, 7][..] } else { dims };
            for &d in dims {
                qudit(&mut s, d);
            }
        }
        Module::States => states(&mut s),
    }
    s.checks
}

pub fn verify_all(dims: &[u32]) -> Vec<Check> {
    Module::ALL.into_iter().flat_map(|m| verify_module(m, dims)).collect()
}

fn gaussian_grid() -> Result<(Grid1D, Vec<f64>)> {
    let g = Grid1D::symmetric(8.0, 321)?;
    let f = g.points().iter().map(|x| (-x * x).exp()).collect();
    Ok((g, f))
}

fn numerics(s: &mut Suite) {
    s.run("trapezoid", |s| {
        let (g, f) = gaussian_grid()?;
        s.below("trapezoid_gaussian", (trapezoid(&f, g.spacing()) - PI.sqrt()).abs(), 1e-12);
        Ok(())
    });
    s.run("derivative", |s| {
        let (g, f) = gaussian_grid()?;
        let df = derivative(&f, g.spacing());
        let err = g
            .points()
            .iter()
            .zip(&df)
            .map(|(x, d)| (d + 2.0 * x * (-x * x).exp()).abs())
            .fold(0.0, f64::max);
        s.below("derivative_gaussian", err, 1e-4);
        Ok(())
    });
    s.run("decay", |s| {
        let (_, f) = gaussian_grid()?;
        let truncated: Vec<f64> = f[130..].to_vec();
        s.holds("decay_accepts_gaussian", check_decay(&f, 1e-3).is_ok(), "full profile");
        s.holds(
            "decay_rejects_truncation",
            matches!(check_decay(&truncated, 1e-3), Err(TomoError::BoundaryLeak { .. })),
            "profile cut at x = -1.5",
        );
        Ok(())
    });
}

fn blob(x: f64, y: f64) -> f64 {
    (-((x - 0.15).powi(2) + (y + 0.1).powi(2)) / (2.0 * 0.12 * 0.12)).exp()
}

fn radon(s: &mut Suite) {
    s.run("isotropy", |s| {
        // Bilinear sampling bias scales as Δ²; Δ = 1/64 keeps it near 3e-5.
        let g = Grid1D::symmetric(5.0, 641)?;
        let d = Density2D::from_fn(g, g, Measure::PlainDxDy, |x, y| (-(x * x + y * y) / 2.0).exp());
        let sino = forward_radon(&d, &uniform_angles(36, 0.0), &Grid1D::symmetric(7.5, 241)?)?;
        s.below("isotropic_rows_agree", sino.max_row_deviation(), 1e-4);
        Ok(())
    });
    s.run("round_trip", |s| {
        let g = Grid1D::symmetric(1.0, 65)?;
        let d = Density2D::from_fn(g, g, Measure::PlainDxDy, blob).normalized()?;
        let sino = forward_radon(&d, &uniform_angles(90, 0.0), &Grid1D::symmetric(1.5, 129)?)?;
        for method in [FilterMethod::Pv, FilterMethod::Ramp] {
            let rec = inverse_radon(&sino, &g, &g, &InverseRadonOptions::with_method(method))?;
            s.below(format!("round_trip_{method:?}").to_lowercase(), rec.relative_l2(&d)?, 0.05);
        }
        let few = forward_radon(&d, &uniform_angles(4, 0.0), &Grid1D::symmetric(1.5, 129)?)?;
        s.holds(
            "too_few_angles_rejected",
            matches!(inverse_radon(&few, &g, &g, &Default::default()), Err(TomoError::TooFewAngles { .. })),
            "4 angles",
        );
        Ok(())
    });
}

fn wigner(s: &mut Suite) {
    s.run("vacuum", |s| {
        let kg = Grid1D::symmetric(8.0, 257)?;
        let pg = Grid1D::symmetric(6.0, 97)?;
        let vac = realize_kernel(&StateSpec::Vacuum, &kg)?;
        let w = wigner_transform(vac.kernel(), &pg, &pg)?;
        s.below("vacuum_origin", (w.sample(0.0, 0.0) - 2.0).abs(), 1e-3);
        s.below("vacuum_normalization", (w.normalization() - 1.0).abs(), 1e-4);
        s.below("vacuum_purity", (trace_product(&w, &w)? - 1.0).abs(), 1e-4);
        s.below("imaginary_part", w.imag_residual(), 1e-10);
        let f1 = realize_kernel(&StateSpec::Fock { n: 1 }, &kg)?;
        let w1 = wigner_transform(f1.kernel(), &pg, &pg)?;
        s.below("fock1_origin", (w1.sample(0.0, 0.0) + 2.0).abs(), 1e-3);
        s.below("vacuum_fock1_orthogonal", trace_product(&w, &w1)?.abs(), 1e-4);
        Ok(())
    });
}

fn fractional(s: &mut Suite) {
    s.run("series", |s| {
        let mut worst = 0.0f64;
        for &theta in &[PI / 6.0, -PI / 3.0, PI / 2.0] {
            for &(x, xp) in &[(0.0, 0.0), (1.2, -0.7), (-2.0, 1.5), (3.0, 2.5)] {
                let closed = quadrature_amplitude(theta, x, xp)?;
                let series = rotation_matrix_element(theta, x, xp, 200)?;
                worst = worst.max((closed - series).norm());
            }
        }
        s.below("series_matches_closed_form", worst, 1e-8);
        Ok(())
    });
    s.run("mub_overlap", |s| {
        let mut worst = 0.0f64;
        for &(x1, t1, x2, t2) in &[(0.3, 0.2, -0.5, 1.1), (1.0, -0.8, 0.4, 0.9), (-1.5, 2.0, 0.0, 0.3)] {
            let num = numerical_mub_overlap(x1, t1, x2, t2)?;
            let exact = continuous_mub_overlap(t1, t2)?;
            worst = worst.max((num / exact - 1.0).abs());
        }
        s.below("overlap_modulus", worst, 0.01);
        Ok(())
    });
    s.run("orthonormality", |s| {
        let basis = OscillatorBasis::new(Grid1D::symmetric(12.0, 961)?, 40);
        s.below("oscillator_orthonormality", basis.orthonormality_defect(), 1e-10);
        Ok(())
    });
}

fn mub_continuous(s: &mut Suite) {
    s.run("vacuum_reconstruction", |s| {
        let offsets = Grid1D::symmetric(7.0, 141)?;
        let out = Grid1D::symmetric(6.0, 97)?;
        let data = exact_quadratures(&StateSpec::Vacuum, &uniform_angles(90, 0.5), &offsets)?;
        let rec = reconstruct_density_matrix(&data, &out, &DmReconstructionOptions::default())?;
        let truth = realize_kernel(&StateSpec::Vacuum, &out)?;
        let err = rec.kernel.kernel().max_abs_diff(truth.kernel())? / truth.kernel().max_abs();
        s.below("vacuum_kernel", err, 0.03);
        s.below("hermiticity_before_symmetrization", rec.diagnostics.hermiticity_residual, 0.05);
        s.below("trace_before_renormalization", (rec.diagnostics.trace_before - 1.0).abs(), 0.02);
        let singular = exact_quadratures(&StateSpec::Vacuum, &uniform_angles(90, 0.0), &offsets)?;
        s.holds(
            "singular_angle_rejected",
            matches!(
                reconstruct_density_matrix(&singular, &out, &Default::default()),
                Err(TomoError::SingularAngleInData { .. })
            ),
            "data includes theta = 0",
        );
        Ok(())
    });
    s.run("displacement", |s| {
        let alpha = Complex64::new(0.6, -0.4);
        let g = Grid1D::symmetric(8.0, 257)?;
        let k = realize_kernel(&StateSpec::Coherent { alpha }, &g)?;
        let (xb, pb) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        let (a, b) = (-1.0, 1.25);
        let c = displacement_coefficient(k.kernel(), a, b)?;
        let oracle = Complex64::from_polar((-(a * a + b * b) / 4.0).exp(), -(a * xb + b * pb) + a * b / 2.0);
        s.below("coherent_displacement_coefficient", (c - oracle).norm(), 1e-6);
        Ok(())
    });
}

fn qudit(s: &mut Suite, d: u32) {
    let dim = match PrimeDim::new(d) {
        Ok(dim) => dim,
        Err(e) => {
            s.holds(format!("d{d}_dimension"), false, e.to_string());
            return;
        }
    };
    let n = dim.size();
    let (x, z) = schwinger_ops(dim);
    let comm = (&z * &x - &x * &z * dim.omega_pow(1)).iter().fold(0.0f64, |m, v| m.max(v.norm()));
    s.below(format!("d{d}_commutation"), comm, 1e-12);
    let fam = mub_family(dim);
    s.below(format!("d{d}_flatness"), fam.flatness_defect(), 1e-12);
    let powers = (1..d).all(|m| (0..d).all(|b| power_identity_check(dim, m, b)));
    s.holds(format!("d{d}_power_identity"), powers, format!("m < {d}, b < {d}"));
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let rho = QuditState::random_mixed(dim, seed);
        match reconstruct_qudit(&measurement_probabilities(&rho, &fam), &fam) {
            Ok(rec) => worst = worst.max(trace_norm_distance(rec.matrix(), rho.matrix())),
            Err(e) => {
                s.holds(format!("d{d}_round_trip"), false, format!("error: {e}"));
                return;
            }
        }
    }
    s.below(format!("d{d}_round_trip"), worst, 1e-10);
    let rank = gram_rank(&operator_basis(dim), 1e-10);
    s.holds(format!("d{d}_gram_rank"), rank == n * n, format!("{rank} of {}", n * n));
}

fn states(s: &mut Suite) {
    s.run("library", |s| {
        let g = Grid1D::symmetric(8.0, 161)?;
        let offsets = Grid1D::symmetric(7.0, 141)?;
        for (name, spec) in test_library() {
            let k = realize_kernel(&spec, &g)?;
            s.below(format!("{name}_trace"), (k.kernel().trace().re - 1.0).abs(), 1e-6);
            s.below(format!("{name}_positivity"), (-k.kernel().eigenvalues()[0]).max(0.0), 1e-8);
            s.below(format!("{name}_fock_tail"), spec.fock_mixture()?.tail_mass, 1e-12);
            let data = exact_quadratures(&spec, &uniform_angles(8, 0.5), &offsets)?;
            let sino = data.sinogram();
            let mass = (0..sino.angles().len()).map(|i| (sino.row_mass(i) - 1.0).abs()).fold(0.0, f64::max);
            s.below(format!("{name}_quadrature_mass"), mass, 1e-6);
        }
        Ok(())
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_names_round_trip() {
        for m in Module::ALL {
            assert_eq!(m.name().parse::<Module>().unwrap(), m);
        }
        assert!("optics".parse::<Module>().is_err());
    }

    #[test]
    fn non_prime_dimension_fails_the_suite() {
        let checks = verify_module(Module::QuditMub, &[4]);
        assert!(checks.iter().any(|c| !c.passed));
    }
}
