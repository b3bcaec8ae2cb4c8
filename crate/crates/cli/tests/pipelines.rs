use std::path::Path;
use std::process::{Command, Output};

fn tomokit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomokit"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tomokit(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn report_field(json: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    v[key].as_f64().unwrap_or_else(|| panic!("no {key} in {json}"))
}

#[test]
fn vacuum_wigner_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "vacuum", "--out", "truth"]);
    ok(d, &["wigner", "--input", "truth", "--out", "w"]);
    ok(d, &["quadratures", "--input", "w", "--angles", "90", "--out", "q"]);
    ok(d, &["reconstruct-wigner", "--input", "q", "--out", "r"]);
    let report = ok(d, &["report", "--input", "r", "--truth", "w"]);
    assert!(report_field(&report, "relative_l2") < 0.05, "{report}");
    let header = std::fs::read_to_string(d.join("q.csv")).unwrap();
    assert!(header.starts_with("theta,xprime,value\n"));
}

#[test]
fn qudit_exact_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["qudit-sim", "--d", "3", "--state", "e0", "--shots", "exact", "--out", "p"]);
    ok(d, &["qudit-recon", "--input", "p", "--out", "rho"]);
    let report = ok(d, &["report", "--input", "rho", "--truth", "p.truth"]);
    assert!(report_field(&report, "trace_norm_error") < 1e-10, "{report}");
    let table = std::fs::read_to_string(d.join("p.csv")).unwrap();
    assert!(table.starts_with("basis,outcome,prob\n"));
    assert!(table.contains("\ncomp,0,"));
}

#[test]
fn density_matrix_pipeline_from_state() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "fock1", "--out", "f"]);
    ok(d, &["sample", "--input", "f", "--shots", "exact", "--out", "q"]);
    ok(d, &["reconstruct-dm", "--input", "q", "--out", "k"]);
    let report = ok(d, &["report", "--input", "k", "--truth", "f"]);
    assert!(report_field(&report, "relative_l2") < 0.05, "{report}");
    let sidecar = std::fs::read_to_string(d.join("k.json")).unwrap();
    assert!(sidecar.contains("\"diagnostics\""));
    // A kernel compares against a Wigner truth through its transform.
    ok(d, &["wigner", "--input", "f", "--out", "fw"]);
    let cross = ok(d, &["report", "--input", "k", "--truth", "fw"]);
    assert!(report_field(&cross, "relative_l2") < 0.05, "{cross}");
}

#[test]
fn classical_pipeline_with_images() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "two_blob", "--pgm", "16", "--out", "ph"]);
    ok(d, &["radon", "--input", "ph", "--angles", "90", "--angle-shift", "0", "--out", "s"]);
    ok(d, &["iradon", "--input", "s", "--method", "pv", "--out", "r"]);
    let report = ok(d, &["report", "--input", "r", "--truth", "ph"]);
    assert!(report_field(&report, "relative_l2") < 0.05, "{report}");
    let pgm = std::fs::read(d.join("ph.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n128 128\n65535\n"));
    assert_eq!(pgm.len(), "P5\n128 128\n65535\n".len() + 128 * 128 * 2);
}

#[test]
fn verify_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = tomokit(dir.path(), &["verify", "--module", "qudit-mub", "--d", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| !l.starts_with("FAIL")));
    // A non-prime dimension fails its checks rather than the argument parse.
    let out = tomokit(dir.path(), &["verify", "--module", "qudit-mub", "--d", "4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(tomokit(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(tomokit(d, &["qudit-mub", "--d", "4", "--out", "m"]).status.code(), Some(2));
    assert_eq!(tomokit(d, &["wigner", "--input", "missing", "--out", "w"]).status.code(), Some(2));
    assert_eq!(tomokit(d, &["qudit-sim", "--d", "3", "--state", "e0", "--shots", "0", "--out", "p"]).status.code(), Some(2));

    ok(d, &["quadratures", "--kind", "vacuum", "--angle-shift", "0", "--out", "q0"]);
    let out = tomokit(d, &["reconstruct-dm", "--input", "q0", "--out", "k"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sin(theta)"));

    // Offsets that cut the state off lose probability mass.
    let out = tomokit(d, &["quadratures", "--kind", "vacuum", "--offset-max", "1.5", "--offsets", "31", "--out", "n"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integrates to"));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let run = |dir: &Path| {
        ok(dir, &["sample", "--kind", "coherent", "--shots", "500", "--seed", "11", "--angles", "16", "--out", "s"]);
        ok(dir, &["qudit-sim", "--d", "7", "--state", "random", "--shots", "100", "--seed", "5", "--out", "p"]);
        ["s.csv", "s.json", "p.csv", "p.json", "p.truth.re.csv", "p.truth.im.csv"]
            .map(|f| std::fs::read(dir.join(f)).unwrap())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_tomokit"))
            .args(["quadratures", "--kind", "even_cat", "--angles", "24", "--out", "q"])
            .env("TOMOKIT_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(dir.path().join("q.csv")).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}
