use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};
use std::time::Instant;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tomokit::fractional::*;
use tomokit::numerics::Grid1D;
use tomokit::TomoError;

fn packet(x: f64) -> Complex64 {
    // Off-centre, with momentum and width ≠ 1 so no rotation maps it to itself.
    let s: f64 = 0.8;
    Complex64::from_polar(
        (PI * s * s).powf(-0.25) * (-(x - 0.7).powi(2) / (2.0 * s * s)).exp(),
        -0.6 * x,
    )
}

fn packet_derivative(x: f64) -> Complex64 {
    let s: f64 = 0.8;
    packet(x) * Complex64::new(-(x - 0.7) / (s * s), -0.6)
}

#[test]
fn amplitude_special_values() {
    for &(x, xp) in &[(0.0, 0.0), (1.3, -0.4), (-2.0, 0.9)] {
        let a = quadrature_amplitude(FRAC_PI_2, x, xp).unwrap();
        let plane = Complex64::from_polar(1.0 / (2.0 * PI).sqrt(), x * xp);
        assert!((a - plane).norm() < 1e-15);
    }
    for &theta in &[0.2, 1.0, -2.5, 3.0] {
        let k = QuadratureKernel::new(theta).unwrap();
        for &(x, xp) in &[(0.3, 2.0), (-1.7, 0.0), (4.0, -3.0)] {
            let modulus = k.amplitude(x, xp).norm_sqr();
            assert!((modulus * 2.0 * PI * theta.sin().abs() - 1.0).abs() < 1e-12);
            assert_eq!(k.amplitude(x, xp), k.amplitude(xp, x));
        }
    }
    assert!(matches!(
        quadrature_amplitude(PI, 0.0, 0.0),
        Err(TomoError::SingularAngle { .. })
    ));
}

#[test]
fn shifting_theta_by_pi_flips_the_eigenvalue() {
    // |−x′, θ+π⟩ and |x′, θ⟩ agree up to one constant phase.
    let theta = 0.9;
    let mut phase = None;
    for &(x, xp) in &[(0.0, 0.5), (1.1, -0.3), (-2.0, 2.0), (0.4, 0.0)] {
        let r = quadrature_amplitude(theta + PI, x, -xp).unwrap() / quadrature_amplitude(theta, x, xp).unwrap();
        assert!((r.norm() - 1.0).abs() < 1e-12);
        let p = *phase.get_or_insert(r);
        assert!((r - p).norm() < 1e-12);
    }
}

#[test]
fn series_matches_closed_form_on_a_grid() {
    let start = Instant::now();
    let g = Grid1D::symmetric(3.0, 21).unwrap();
    let mut worst = 0.0f64;
    for &theta in &[FRAC_PI_6, -FRAC_PI_6, FRAC_PI_3, -FRAC_PI_3, FRAC_PI_2] {
        for x in g.points() {
            for xp in g.points() {
                let s = rotation_matrix_element(theta, x, xp, 200).unwrap();
                let c = quadrature_amplitude(theta, x, xp).unwrap();
                worst = worst.max((s - c).norm());
            }
        }
    }
    assert!(worst < 1e-8, "worst {worst}");
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn series_reference_points() {
    let v = rotation_matrix_element(FRAC_PI_2, 0.0, 0.0, 200).unwrap();
    assert!((v - Complex64::new(1.0 / (2.0 * PI).sqrt(), 0.0)).norm() < 1e-6);
    let v = rotation_matrix_element(FRAC_PI_3, 0.7, -0.4, 200).unwrap();
    let c = quadrature_amplitude(FRAC_PI_3, 0.7, -0.4).unwrap();
    assert!((v - c).norm() < 1e-8);
}

#[test]
fn identity_limit_concentrates() {
    let peak = |n| rotation_partial_sum(0.0, 0.0, 0.0, n).re;
    assert!(peak(200) > peak(50) && peak(50) > peak(10));
    // Mass of the truncated completeness kernel near the diagonal.
    let g = Grid1D::symmetric(1.0, 801).unwrap();
    let row: Vec<f64> = g.points().iter().map(|&xp| rotation_partial_sum(0.0, 0.3, 0.3 + xp, 200).re).collect();
    let mass = tomokit::numerics::trapezoid(&row, g.spacing());
    assert!((mass - 1.0).abs() < 0.05, "mass {mass}");
}

#[test]
fn truncation_is_reported() {
    assert!(matches!(
        rotation_matrix_element(FRAC_PI_3, 6.0, -5.0, 20),
        Err(TomoError::TruncationInsufficient { .. })
    ));
}

#[test]
fn oscillator_basis_is_orthonormal() {
    let b = OscillatorBasis::new(Grid1D::symmetric(18.0, 1441).unwrap(), 80);
    assert!(b.orthonormality_defect() < 1e-8);
    let v = oscillator_values(35.0, 200);
    assert!(v.iter().all(|x| x.is_finite()));
}

#[test]
fn rotations_compose() {
    let g = Grid1D::symmetric(10.0, 401).unwrap();
    let f: Vec<Complex64> = g.points().iter().map(|&x| packet(x)).collect();
    for &(t1, t2) in &[(0.4, 0.7), (FRAC_PI_3, -1.2), (1.9, 0.8)] {
        let two = apply_rotation(t1, &apply_rotation(t2, &f, &g).unwrap(), &g).unwrap();
        let one = apply_rotation(t1 + t2, &f, &g).unwrap();
        let worst = (0..g.len())
            .filter(|&i| g.point(i).abs() <= 5.0)
            .map(|i| (two[i] - one[i]).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "({t1}, {t2}): {worst}");
    }
    // Quarter turns compose to parity.
    let half = apply_rotation(FRAC_PI_2, &apply_rotation(FRAC_PI_2, &f, &g).unwrap(), &g).unwrap();
    let parity = apply_rotation(PI, &f, &g).unwrap();
    let worst = (100..301).map(|i| (half[i] - parity[i]).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-4);
}

#[test]
fn rotation_preserves_the_norm_and_moves_the_mean() {
    let g = Grid1D::symmetric(10.0, 401).unwrap();
    let f: Vec<Complex64> = g.points().iter().map(|&x| packet(x)).collect();
    let theta = 0.8;
    let rotated = quadrature_wavefunction(theta, &f, &g).unwrap();
    let dens: Vec<f64> = rotated.iter().map(|v| v.norm_sqr()).collect();
    let norm = tomokit::numerics::trapezoid(&dens, g.spacing());
    assert!((norm - 1.0).abs() < 1e-8);
    // ⟨X̂_θ⟩ = ⟨x⟩cosθ + ⟨p⟩sinθ with ⟨x⟩ = 0.7, ⟨p⟩ = −0.6.
    let first: Vec<f64> = dens.iter().zip(g.points()).map(|(d, x)| d * x).collect();
    let mean = tomokit::numerics::trapezoid(&first, g.spacing());
    assert!((mean - (0.7 * theta.cos() - 0.6 * theta.sin())).abs() < 1e-8);
}

fn eigen_residual(theta: f64, xp: f64, h: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let k = QuadratureKernel::new(theta).unwrap();
    let mut worst = 0.0f64;
    let mut x = -2.0;
    while x <= 2.0 {
        let d = (k.amplitude(x + h, xp) - k.amplitude(x - h, xp)) / (2.0 * h);
        let lhs = k.amplitude(x, xp) * x * c - Complex64::i() * s * d;
        worst = worst.max((lhs - k.amplitude(x, xp) * xp).norm());
        x += 0.25;
    }
    worst
}

#[test]
fn eigen_relation_holds_to_second_order() {
    for &(theta, xp) in &[(0.6, 0.3), (FRAC_PI_2, -1.0), (2.4, 1.5)] {
        let coarse = eigen_residual(theta, xp, 0.01);
        let fine = eigen_residual(theta, xp, 0.005);
        assert!(coarse < 1e-3, "{coarse}");
        let order = (coarse / fine).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }
}

fn conjugate_momentum_residual(theta: f64, n: usize) -> f64 {
    // P̂_θ = −x̂ sinθ + p̂ cosθ acts as −i d/dx′ on ⟨x′,θ|φ⟩.
    let g = Grid1D::symmetric(10.0, n).unwrap();
    let (s, c) = theta.sin_cos();
    let phi: Vec<Complex64> = g.points().iter().map(|&x| packet(x)).collect();
    let p_phi: Vec<Complex64> = g
        .points()
        .iter()
        .map(|&x| packet(x) * (-s * x) - Complex64::i() * c * packet_derivative(x))
        .collect();
    let a = quadrature_wavefunction(theta, &phi, &g).unwrap();
    let b = quadrature_wavefunction(theta, &p_phi, &g).unwrap();
    let h = g.spacing();
    (1..n - 1)
        .filter(|&i| g.point(i).abs() <= 4.0)
        .map(|i| (b[i] + Complex64::i() * (a[i + 1] - a[i - 1]) / (2.0 * h)).norm())
        .fold(0.0, f64::max)
}

#[test]
fn conjugate_momentum_is_a_derivative() {
    for &theta in &[0.5, 1.3, -2.0] {
        let coarse = conjugate_momentum_residual(theta, 401);
        let fine = conjugate_momentum_residual(theta, 801);
        assert!(coarse < 5e-3, "{coarse}");
        assert!(coarse / fine > 3.5, "ratio {}", coarse / fine);
    }
}

#[test]
fn projector_kernel_structure() {
    let theta: f64 = 0.7;
    let expected = 1.0 / (2.0 * PI * theta.sin());
    let mut traces = Vec::new();
    for &half in &[4.0, 8.0] {
        let g = Grid1D::symmetric(half, 8 * half as usize + 1).unwrap();
        let k = build_projector_kernel(theta, 0.2, &g).unwrap();
        for c in k.diagonal() {
            assert!((c - Complex64::new(expected, 0.0)).norm() < 1e-14);
        }
        assert!(k.hermiticity_residual() < 1e-14);
        traces.push(k.trace().re);
        // Anti-diagonal samples through (q, q) depend only on y: e^{iy(x′ − q cosθ)/sinθ}.
        let q = g.point(g.len() / 2 + 3);
        let y = 2.0 * g.spacing() * 5.0;
        let v = k.sample(q + y / 2.0, q - y / 2.0);
        let oracle = Complex64::from_polar(expected, y * (0.2 - q * theta.cos()) / theta.sin());
        assert!((v - oracle).norm() < 1e-12);
    }
    assert!((traces[1] / traces[0] - 2.0).abs() < 0.05);
}

#[test]
fn overlap_law_constants() {
    assert!((continuous_mub_overlap(FRAC_PI_2, 0.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
    for &theta in &[0.0f64, 0.8, -2.1] {
        let v = continuous_mub_overlap(theta, theta + FRAC_PI_6).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-12);
    }
    assert!(continuous_mub_overlap(0.4, 0.4).is_err());
}

#[test]
fn numerical_overlap_matches_the_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut n = 0;
    while n < 20 {
        let (t1, t2) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        if (t1 - t2).sin().abs() < 0.1 || t1.sin().abs() < 0.05 || t2.sin().abs() < 0.05 {
            continue;
        }
        let (x1, x2) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let num = numerical_mub_overlap(x1, t1, x2, t2).unwrap();
        let law = continuous_mub_overlap(t1, t2).unwrap();
        assert!((num / law - 1.0).abs() < 0.01, "{x1} {t1} {x2} {t2}: {num} vs {law}");
        n += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn amplitude_modulus_is_flat(theta in -3.1f64..3.1, x in -10.0f64..10.0, xp in -10.0f64..10.0) {
        prop_assume!(theta.sin().abs() > 1e-3);
        let a = quadrature_amplitude(theta, x, xp).unwrap();
        prop_assert!((a.norm_sqr() * 2.0 * PI * theta.sin().abs() - 1.0).abs() < 1e-12);
        prop_assert_eq!(a, quadrature_amplitude(theta, xp, x).unwrap());
    }

    #[test]
    fn reduce_angle_lands_in_range(theta in -100.0f64..100.0) {
        let t = reduce_angle(theta);
        prop_assert!(t > -PI && t <= PI);
        prop_assert!(((theta - t) / (2.0 * PI) - ((theta - t) / (2.0 * PI)).round()).abs() < 1e-9);
    }
}
