use std::path::Path;

use num_complex::Complex64;
use proptest::prelude::*;
use tomokit::io::*;
use tomokit::mub_continuous::{reconstruct_density_matrix, Provenance};
use tomokit::numerics::Grid1D;
use tomokit::qudit::{measurement_probabilities, mub_family, PrimeDim, QuditState};
use tomokit::radon::{forward_radon, uniform_angles, Density2D, Measure};
use tomokit::states::*;
use tomokit::wigner::wigner_transform;
use tomokit::TomoError;

fn round_trip(dir: &Path, name: &str, a: &Artifact) -> Artifact {
    let stem = dir.join(name);
    write_artifact(&stem, a).unwrap();
    assert_eq!(artifact_kind(&stem).unwrap(), a.kind_name());
    read_artifact(&stem).unwrap()
}

#[test]
fn every_kind_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // Unequal axes catch transposition.
    let x = Grid1D::symmetric(1.0, 33).unwrap();
    let y = Grid1D::new(-0.9, 1.1, 21).unwrap();
    let density = Density2D::from_fn(x, y, Measure::PlainDxDy, |a, b| (a + 2.0 * b).sin() / 3.0);
    let Artifact::Density(back) = round_trip(d, "density", &Artifact::Density(density.clone())) else { panic!() };
    assert_eq!(back, density);

    let sq = Density2D::from_fn(x, x, Measure::PlainDxDy, |a, b| (-(a * a + b * b) * 20.0).exp());
    let sino = forward_radon(&sq, &uniform_angles(8, 0.0), &Grid1D::symmetric(1.5, 41).unwrap()).unwrap();
    let Artifact::Sinogram(back) = round_trip(d, "sino", &Artifact::Sinogram(sino.clone())) else { panic!() };
    assert_eq!(back, sino);

    let offsets = Grid1D::symmetric(7.0, 71).unwrap();
    let data = sample_quadratures(&StateSpec::Vacuum, &uniform_angles(10, 0.5), &offsets, 300, 4).unwrap();
    let Artifact::Quadratures(back) = round_trip(d, "quad", &Artifact::Quadratures(data.clone())) else { panic!() };
    assert_eq!(back, data);
    assert_eq!(back.provenance(), Provenance::Sampled { shots: 300 });

    let kg = Grid1D::symmetric(8.0, 65).unwrap();
    let spec = StateSpec::Coherent { alpha: Complex64::new(0.5, -0.3) };
    let kernel = realize_kernel(&spec, &kg).unwrap().into_kernel();
    let art = Artifact::Kernel { kernel: kernel.clone(), spec: Some(spec.clone()), diagnostics: None };
    let Artifact::Kernel { kernel: k2, spec: s2, .. } = round_trip(d, "kernel", &art) else { panic!() };
    assert_eq!(k2, kernel);
    assert_eq!(s2, Some(spec));

    let w = wigner_transform(&kernel, &Grid1D::symmetric(4.0, 17).unwrap(), &Grid1D::symmetric(3.0, 13).unwrap()).unwrap();
    let Artifact::Wigner(back) = round_trip(d, "w", &Artifact::Wigner(w.clone())) else { panic!() };
    assert_eq!(back, w);

    let dim = PrimeDim::new(5).unwrap();
    let rho = QuditState::random_mixed(dim, 8);
    let probs = measurement_probabilities(&rho, &mub_family(dim));
    let art = Artifact::QuditProbabilities { probs: probs.clone(), provenance: Provenance::Exact, seed: None, truth: Some("t".into()) };
    let Artifact::QuditProbabilities { probs: p2, truth, .. } = round_trip(d, "p", &art) else { panic!() };
    assert_eq!(p2, probs);
    assert_eq!(truth.as_deref(), Some("t"));

    let Artifact::QuditState(back) = round_trip(d, "rho", &Artifact::QuditState(rho.clone())) else { panic!() };
    assert_eq!(back, rho);

    let fam = mub_family(dim);
    let Artifact::MubFamily(back) = round_trip(d, "fam", &Artifact::MubFamily(fam.clone())) else { panic!() };
    assert_eq!(back, fam);
}

#[test]
fn reconstruction_diagnostics_survive() {
    let dir = tempfile::tempdir().unwrap();
    let data = exact_quadratures(&StateSpec::Vacuum, &uniform_angles(90, 0.5), &Grid1D::symmetric(7.0, 141).unwrap()).unwrap();
    let rec = reconstruct_density_matrix(&data, &Grid1D::symmetric(6.0, 49).unwrap(), &Default::default()).unwrap();
    let art = Artifact::Kernel { kernel: rec.kernel.kernel().clone(), spec: None, diagnostics: Some(rec.diagnostics) };
    let Artifact::Kernel { diagnostics, .. } = round_trip(dir.path(), "k", &art) else { panic!() };
    assert_eq!(diagnostics, Some(rec.diagnostics));
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("d");
    let g = Grid1D::symmetric(1.0, 5).unwrap();
    write_artifact(&stem, &Artifact::Density(Density2D::zeros(g, g, Measure::PlainDxDy))).unwrap();
    let csv = with_suffix(&stem, ".csv");
    let text = std::fs::read_to_string(&csv).unwrap();

    std::fs::write(&csv, text.replacen("x,y,value", "y,x,value", 1)).unwrap();
    assert!(matches!(read_artifact(&stem), Err(TomoError::Format(_))));
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    std::fs::write(&csv, lines.join("\n")).unwrap();
    assert!(matches!(read_artifact(&stem), Err(TomoError::Format(_))));
    std::fs::write(&csv, text.replacen("-1.0000000000000000e0,-1", "-0.5000000000000000e0,-1", 1)).unwrap();
    assert!(matches!(read_artifact(&stem), Err(TomoError::Format(_))));
    std::fs::write(&csv, text.replace("0.0000000000000000e0\n", "zero\n")).unwrap();
    assert!(matches!(read_artifact(&stem), Err(TomoError::Format(_))));

    std::fs::write(with_suffix(&stem, ".json"), r#"{"kind": "hologram"}"#).unwrap();
    assert!(matches!(read_artifact(&stem), Err(TomoError::Format(_))));
    std::fs::write(with_suffix(&stem, ".json"), r#"{"kind": "qudit_state", "d": 4, "trace": [1, 0], "min_eigenvalue": 0}"#).unwrap();
    assert!(matches!(read_artifact(&stem), Err(TomoError::NotPrime(4))));
    assert!(matches!(read_artifact(&dir.path().join("absent")), Err(TomoError::Io(_))));
}

#[test]
fn pgm_scale_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("img");
    let g = Grid1D::symmetric(1.0, 4).unwrap();
    let d = Density2D::from_fn(g, g, Measure::PlainDxDy, |x, y| x + 2.0 * y);
    write_artifact(&stem, &Artifact::Density(d.clone())).unwrap();
    let scale = write_pgm(&stem, &d, 8).unwrap();
    assert_eq!((scale.min, scale.max), (-3.0, 3.0));
    let bytes = std::fs::read(with_suffix(&stem, ".pgm")).unwrap();
    let header = b"P5\n4 4\n255\n";
    assert!(bytes.starts_with(header));
    let pixels = &bytes[header.len()..];
    // Top-left pixel is (x min, y max); bottom-right is (x max, y min).
    // f = x + 2y: 1 at the top-left, −1 at the bottom-right.
    assert_eq!(pixels[0], ((4.0 / 6.0) * 255.0f64).round() as u8);
    assert_eq!(pixels[15], ((2.0 / 6.0) * 255.0f64).round() as u8);
    let sidecar = std::fs::read_to_string(with_suffix(&stem, ".json")).unwrap();
    assert!(sidecar.contains("\"bits\": 8"));
    assert!(read_artifact(&stem).is_ok());
    assert!(write_pgm(&stem, &d, 12).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn density_values_are_written_exactly(values in proptest::collection::vec(-1e300f64..1e300, 12)) {
        let dir = tempfile::tempdir().unwrap();
        let d = Density2D::new(Grid1D::new(0.0, 1.0, 4).unwrap(), Grid1D::new(-2.0, 3.0, 3).unwrap(), values, Measure::DqDpOver2Pi).unwrap();
        let stem = dir.path().join("p");
        write_artifact(&stem, &Artifact::Density(d.clone())).unwrap();
        let Artifact::Density(back) = read_artifact(&stem).unwrap() else { panic!() };
        prop_assert_eq!(back, d);
    }
}
