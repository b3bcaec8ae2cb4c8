//! On-disk artifacts: CSV tables with a header line plus a JSON sidecar
//! `<stem>.json` whose `kind` field names the artifact type.
//!
//! Complex tables are split into `<stem>.re.csv` and `<stem>.im.csv` with the
//! same coordinate columns. Floats are written with 17 significant digits so
//! files round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::mub_continuous::{DmDiagnostics, Provenance, QuadratureDataset};
use crate::numerics::Grid1D;
use crate::qudit::{MubFamily, MubProbabilities, PrimeDim, QuditState};
use crate::radon::{Density2D, Measure, Sinogram};
use crate::states::StateSpec;
use crate::wigner::{OperatorKernel, WignerField};

/// Relative tolerance when checking CSV coordinates against sidecar grids.
const COORD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum Artifact {
    Density(Density2D),
    /// Projections of a classical density; same table as quadratures.
    Sinogram(Sinogram),
    Quadratures(QuadratureDataset),
    Wigner(WignerField),
    Kernel {
        kernel: OperatorKernel,
        spec: Option<StateSpec>,
        diagnostics: Option<DmDiagnostics>,
    },
    QuditProbabilities {
        probs: MubProbabilities,
        provenance: Provenance,
        seed: Option<u64>,
        /// Stem of the ground-truth state, relative to this artifact's directory.
        truth: Option<String>,
    },
    QuditState(QuditState),
    MubFamily(MubFamily),
}

impl Artifact {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Artifact::Density(_) => "density2d",
            Artifact::Sinogram(_) => "sinogram",
            Artifact::Quadratures(_) => "quadratures",
            Artifact::Wigner(_) => "wigner",
            Artifact::Kernel { .. } => "kernel",
            Artifact::QuditProbabilities { .. } => "qudit_probabilities",
            Artifact::QuditState(_) => "qudit_state",
            Artifact::MubFamily(_) => "mub_family",
        }
    }
}

/// Scale of an 8- or 16-bit PGM image: level 0 is `min`, full scale is `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgmScale {
    pub bits: u8,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Sidecar {
    Density2d {
        x: Grid1D,
        y: Grid1D,
        measure: Measure,
        mass: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pgm: Option<PgmScale>,
    },
    Sinogram {
        angles: Vec<f64>,
        offsets: Grid1D,
        measure: Measure,
    },
    Quadratures {
        angles: Vec<f64>,
        offsets: Grid1D,
        measure: Measure,
        provenance: Provenance,
    },
    Wigner {
        q: Grid1D,
        p: Grid1D,
        measure: Measure,
        normalization: f64,
        imag_residual: f64,
    },
    Kernel {
        grid: Grid1D,
        trace: [f64; 2],
        hermiticity_residual: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spec: Option<StateSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagnostics: Option<DmDiagnostics>,
    },
    QuditProbabilities {
        d: u32,
        provenance: Provenance,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truth: Option<String>,
    },
    QuditState {
        d: u32,
        trace: [f64; 2],
        min_eigenvalue: f64,
    },
    MubFamily {
        d: u32,
        flatness_defect: f64,
    },
}

/// `<stem><suffix>`, e.g. `out/w` + `.json`.
pub fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn revalidate(g: &Grid1D) -> Result<Grid1D> {
    Grid1D::new(g.min(), g.max(), g.len()).map_err(|e| TomoError::Format(format!("sidecar grid: {e}")))
}

fn prime(d: u32) -> Result<PrimeDim> {
    PrimeDim::new(d)
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header).map_err(csv_err)?;
    Ok(w)
}

fn csv_err(e: csv::Error) -> TomoError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => TomoError::Io(io),
        other => TomoError::Format(format!("csv: {other:?}")),
    }
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Rows of a CSV file as strings, after checking the header.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let file = File::open(path).map_err(|e| {
        TomoError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let mut r = csv::Reader::from_reader(file);
    let got: Vec<String> = r.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
    if got != header {
        return Err(TomoError::Format(format!(
            "{}: header {:?}, expected {:?}",
            path.display(),
            got,
            header
        )));
    }
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>().map_err(csv_err)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(TomoError::Format(format!("{}: line {} has {} fields", path.display(), i + 2, row.len())));
        }
    }
    Ok(rows)
}

fn field_f64(path: &Path, row: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    row[i]
        .trim()
        .parse()
        .map_err(|_| TomoError::Format(format!("{}: line {}: bad number {:?}", path.display(), line + 2, &row[i])))
}

fn field_usize(path: &Path, row: &csv::StringRecord, i: usize, line: usize) -> Result<usize> {
    row[i]
        .trim()
        .parse()
        .map_err(|_| TomoError::Format(format!("{}: line {}: bad index {:?}", path.display(), line + 2, &row[i])))
}

fn check_coord(path: &Path, line: usize, got: f64, want: f64, scale: f64) -> Result<()> {
    if (got - want).abs() > COORD_TOLERANCE * scale.max(1.0) {
        return Err(TomoError::Format(format!(
            "{}: line {}: coordinate {got} does not match grid value {want}",
            path.display(),
            line + 2
        )));
    }
    Ok(())
}

/// Reads a table whose first columns are coordinates on a 2D lattice
/// (`outer` slow, `inner` fast) and whose last column is the value.
fn read_lattice(path: &Path, header: &[&str], outer: &[f64], inner: &[f64]) -> Result<Vec<f64>> {
    let rows = read_csv(path, header)?;
    let n = outer.len() * inner.len();
    if rows.len() != n {
        return Err(TomoError::Format(format!("{}: {} data lines, expected {n}", path.display(), rows.len())));
    }
    let scale = outer.iter().chain(inner).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut values = Vec::with_capacity(n);
    for (line, row) in rows.iter().enumerate() {
        let (a, b) = (line / inner.len(), line % inner.len());
        check_coord(path, line, field_f64(path, row, 0, line)?, outer[a], scale)?;
        check_coord(path, line, field_f64(path, row, 1, line)?, inner[b], scale)?;
        values.push(field_f64(path, row, 2, line)?);
    }
    Ok(values)
}

fn write_lattice(path: &Path, header: &[&str], outer: &[f64], inner: &[f64], values: &[f64]) -> Result<()> {
    let mut w = csv_writer(path, header)?;
    for (a, &o) in outer.iter().enumerate() {
        for (b, &i) in inner.iter().enumerate() {
            let v = values[a * inner.len() + b];
            w.write_record([fmt_float(o), fmt_float(i), fmt_float(v)]).map_err(csv_err)?;
        }
    }
    finish(w)
}

/// A Density2D as an x-major table; memory order is y-major.
fn write_field(path: &Path, header: &[&str], d: &Density2D) -> Result<()> {
    let (x, y) = (d.x_grid().points(), d.y_grid().points());
    let mut w = csv_writer(path, header)?;
    for (ix, &xv) in x.iter().enumerate() {
        for (iy, &yv) in y.iter().enumerate() {
            w.write_record([fmt_float(xv), fmt_float(yv), fmt_float(d.get(ix, iy))]).map_err(csv_err)?;
        }
    }
    finish(w)
}

fn read_field(path: &Path, header: &[&str], x: &Grid1D, y: &Grid1D) -> Result<Vec<f64>> {
    let by_x = read_lattice(path, header, &x.points(), &y.points())?;
    let (nx, ny) = (x.len(), y.len());
    Ok((0..nx * ny).map(|k| by_x[(k % nx) * ny + k / nx]).collect())
}

fn write_sidecar(stem: &Path, sidecar: &Sidecar) -> Result<()> {
    let path = with_suffix(stem, ".json");
    let mut text = serde_json::to_string_pretty(sidecar)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_sidecar(stem: &Path) -> Result<Sidecar> {
    let path = with_suffix(stem, ".json");
    let text = std::fs::read_to_string(&path).map_err(|e| {
        TomoError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    serde_json::from_str(&text).map_err(|e| TomoError::Format(format!("{}: {e}", path.display())))
}

fn split(values: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (values.iter().map(|v| v.re).collect(), values.iter().map(|v| v.im).collect())
}

fn join(re: Vec<f64>, im: Vec<f64>) -> Vec<Complex64> {
    re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
}

fn matrix_entries(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

fn indices(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

fn write_index_table(path: &Path, header: &[&str], n: usize, values: &[f64]) -> Result<()> {
    let mut w = csv_writer(path, header)?;
    for (k, v) in values.iter().enumerate() {
        w.write_record([(k / n).to_string(), (k % n).to_string(), fmt_float(*v)]).map_err(csv_err)?;
    }
    finish(w)
}

/// Writes `artifact` as `<stem>.csv` (or the `.re.csv`/`.im.csv` pair) and
/// `<stem>.json`.
pub fn write_artifact(stem: &Path, artifact: &Artifact) -> Result<()> {
    let csv_path = with_suffix(stem, ".csv");
    let re_path = with_suffix(stem, ".re.csv");
    let im_path = with_suffix(stem, ".im.csv");
    match artifact {
        Artifact::Density(d) => {
            write_field(&csv_path, &["x", "y", "value"], d)?;
            write_sidecar(
                stem,
                &Sidecar::Density2d {
                    x: *d.x_grid(),
                    y: *d.y_grid(),
                    measure: d.measure(),
                    mass: d.mass(),
                    pgm: None,
                },
            )
        }
        Artifact::Sinogram(s) => {
            write_lattice(&csv_path, &["theta", "xprime", "value"], s.angles(), &s.offsets().points(), s.values())?;
            write_sidecar(
                stem,
                &Sidecar::Sinogram {
                    angles: s.angles().to_vec(),
                    offsets: *s.offsets(),
                    measure: s.measure(),
                },
            )
        }
        Artifact::Quadratures(data) => {
            let s = data.sinogram();
            write_lattice(&csv_path, &["theta", "xprime", "value"], s.angles(), &s.offsets().points(), s.values())?;
            write_sidecar(
                stem,
                &Sidecar::Quadratures {
                    angles: s.angles().to_vec(),
                    offsets: *s.offsets(),
                    measure: s.measure(),
                    provenance: data.provenance(),
                },
            )
        }
        Artifact::Wigner(w) => {
            write_field(&csv_path, &["q", "p", "value"], w.field())?;
            write_sidecar(
                stem,
                &Sidecar::Wigner {
                    q: *w.q_grid(),
                    p: *w.p_grid(),
                    measure: w.field().measure(),
                    normalization: w.normalization(),
                    imag_residual: w.imag_residual(),
                },
            )
        }
        Artifact::Kernel {
            kernel,
            spec,
            diagnostics,
        } => {
            let x = kernel.grid().points();
            let (re, im) = split(kernel.values());
            write_lattice(&re_path, &["x1", "x2", "value"], &x, &x, &re)?;
            write_lattice(&im_path, &["x1", "x2", "value"], &x, &x, &im)?;
            let tr = kernel.trace();
            write_sidecar(
                stem,
                &Sidecar::Kernel {
                    grid: *kernel.grid(),
                    trace: [tr.re, tr.im],
                    hermiticity_residual: kernel.hermiticity_residual(),
                    spec: spec.clone(),
                    diagnostics: *diagnostics,
                },
            )
        }
        Artifact::QuditProbabilities {
            probs,
            provenance,
            seed,
            truth,
        } => {
            let d = probs.dim().size();
            let mut w = csv_writer(&csv_path, &["basis", "outcome", "prob"])?;
            for (b, row) in probs.rows().iter().enumerate() {
                let label = if b == d { "comp".to_string() } else { b.to_string() };
                for (c, p) in row.iter().enumerate() {
                    w.write_record([label.clone(), c.to_string(), fmt_float(*p)]).map_err(csv_err)?;
                }
            }
            finish(w)?;
            write_sidecar(
                stem,
                &Sidecar::QuditProbabilities {
                    d: probs.dim().get(),
                    provenance: *provenance,
                    seed: *seed,
                    truth: truth.clone(),
                },
            )
        }
        Artifact::QuditState(s) => {
            let n = s.dim().size();
            let (re, im) = split(&matrix_entries(s.matrix()));
            write_index_table(&re_path, &["row", "col", "value"], n, &re)?;
            write_index_table(&im_path, &["row", "col", "value"], n, &im)?;
            let tr = s.matrix().trace();
            write_sidecar(
                stem,
                &Sidecar::QuditState {
                    d: s.dim().get(),
                    trace: [tr.re, tr.im],
                    min_eigenvalue: s.eigenvalues()[0],
                },
            )
        }
        Artifact::MubFamily(fam) => {
            let n = fam.dim().size();
            let header = ["basis", "vector", "component", "value"];
            let mut re = csv_writer(&re_path, &header)?;
            let mut im = csv_writer(&im_path, &header)?;
            for (b, basis) in fam.bases().iter().enumerate() {
                let label = if b == n { "comp".to_string() } else { b.to_string() };
                for c in 0..n {
                    for k in 0..n {
                        let v = basis[(k, c)];
                        let coords = [label.clone(), c.to_string(), k.to_string()];
                        re.write_record(coords.iter().cloned().chain([fmt_float(v.re)])).map_err(csv_err)?;
                        im.write_record(coords.into_iter().chain([fmt_float(v.im)])).map_err(csv_err)?;
                    }
                }
            }
            finish(re)?;
            finish(im)?;
            write_sidecar(
                stem,
                &Sidecar::MubFamily {
                    d: fam.dim().get(),
                    flatness_defect: fam.flatness_defect(),
                },
            )
        }
    }
}

/// Reads back anything [`write_artifact`] produced; the sidecar decides the type.
pub fn read_artifact(stem: &Path) -> Result<Artifact> {
    let csv_path = with_suffix(stem, ".csv");
    let re_path = with_suffix(stem, ".re.csv");
    let im_path = with_suffix(stem, ".im.csv");
    match read_sidecar(stem)? {
        Sidecar::Density2d { x, y, measure, .. } => {
            let (x, y) = (revalidate(&x)?, revalidate(&y)?);
            let values = read_field(&csv_path, &["x", "y", "value"], &x, &y)?;
            Ok(Artifact::Density(Density2D::new(x, y, values, measure)?))
        }
        Sidecar::Sinogram {
            angles,
            offsets,
            measure,
        } => {
            let offsets = revalidate(&offsets)?;
            let values = read_lattice(&csv_path, &["theta", "xprime", "value"], &angles, &offsets.points())?;
            Ok(Artifact::Sinogram(Sinogram::new(angles, offsets, values, measure)?))
        }
        Sidecar::Quadratures {
            angles,
            offsets,
            measure,
            provenance,
        } => {
            let offsets = revalidate(&offsets)?;
            let values = read_lattice(&csv_path, &["theta", "xprime", "value"], &angles, &offsets.points())?;
            let sino = Sinogram::new(angles, offsets, values, measure)?;
            Ok(Artifact::Quadratures(QuadratureDataset::new(sino, provenance)?))
        }
        Sidecar::Wigner {
            q,
            p,
            measure,
            imag_residual,
            ..
        } => {
            let (q, p) = (revalidate(&q)?, revalidate(&p)?);
            let values = read_field(&csv_path, &["q", "p", "value"], &q, &p)?;
            let field = Density2D::new(q, p, values, measure)?;
            Ok(Artifact::Wigner(WignerField::new(field, imag_residual)?))
        }
        Sidecar::Kernel {
            grid,
            spec,
            diagnostics,
            ..
        } => {
            let grid = revalidate(&grid)?;
            let x = grid.points();
            let re = read_lattice(&re_path, &["x1", "x2", "value"], &x, &x)?;
            let im = read_lattice(&im_path, &["x1", "x2", "value"], &x, &x)?;
            Ok(Artifact::Kernel {
                kernel: OperatorKernel::new(grid, join(re, im))?,
                spec,
                diagnostics,
            })
        }
        Sidecar::QuditProbabilities {
            d,
            provenance,
            seed,
            truth,
        } => {
            let dim = prime(d)?;
            let n = dim.size();
            let rows = read_csv(&csv_path, &["basis", "outcome", "prob"])?;
            if rows.len() != n * (n + 1) {
                return Err(TomoError::Format(format!(
                    "{}: {} data lines, expected {}",
                    csv_path.display(),
                    rows.len(),
                    n * (n + 1)
                )));
            }
            let mut table = vec![vec![0.0; n]; n + 1];
            for (line, row) in rows.iter().enumerate() {
                let (b, c) = (line / n, line % n);
                let want = if b == n { "comp".to_string() } else { b.to_string() };
                if row[0].trim() != want || field_usize(&csv_path, row, 1, line)? != c {
                    return Err(TomoError::Format(format!(
                        "{}: line {}: expected basis {want}, outcome {c}",
                        csv_path.display(),
                        line + 2
                    )));
                }
                table[b][c] = field_f64(&csv_path, row, 2, line)?;
            }
            Ok(Artifact::QuditProbabilities {
                probs: MubProbabilities::new(dim, table)?,
                provenance,
                seed,
                truth,
            })
        }
        Sidecar::QuditState { d, .. } => {
            let dim = prime(d)?;
            let idx = indices(dim.size());
            let re = read_lattice(&re_path, &["row", "col", "value"], &idx, &idx)?;
            let im = read_lattice(&im_path, &["row", "col", "value"], &idx, &idx)?;
            let n = dim.size();
            let m = DMatrix::from_row_slice(n, n, &join(re, im));
            Ok(Artifact::QuditState(QuditState::from_estimate(dim, m)?))
        }
        Sidecar::MubFamily { d, .. } => {
            // The family is a pure function of d; the tables are for inspection.
            Ok(Artifact::MubFamily(crate::qudit::mub_family(prime(d)?)))
        }
    }
}

/// Writes `density` as a binary PGM (8 or 16 bits, min-max scaled) next to
/// its CSV and records the scale in the sidecar.
pub fn write_pgm(stem: &Path, density: &Density2D, bits: u8) -> Result<PgmScale> {
    let maxval: u32 = match bits {
        8 => 255,
        16 => 65535,
        _ => return Err(TomoError::InvalidArgument(format!("PGM depth must be 8 or 16, got {bits}"))),
    };
    let values = density.values();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if max > min { max - min } else { 1.0 };
    let (nx, ny) = (density.x_grid().len(), density.y_grid().len());
    let mut out = BufWriter::new(File::create(with_suffix(stem, ".pgm"))?);
    write!(out, "P5\n{nx} {ny}\n{maxval}\n")?;
    // Top row of the image is the largest y.
    for iy in (0..ny).rev() {
        for &v in density.row(iy) {
            let level = (((v - min) / range) * maxval as f64).round() as u32;
            if bits == 8 {
                out.write_all(&[level as u8])?;
            } else {
                out.write_all(&(level as u16).to_be_bytes())?;
            }
        }
    }
    out.flush()?;
    let scale = PgmScale { bits, min, max };
    let mut sidecar = read_sidecar(stem)?;
    if let Sidecar::Density2d { pgm, .. } = &mut sidecar {
        *pgm = Some(scale);
    }
    write_sidecar(stem, &sidecar)?;
    Ok(scale)
}

/// Kind recorded in a sidecar, without loading the tables.
pub fn artifact_kind(stem: &Path) -> Result<String> {
    let path = with_suffix(stem, ".json");
    let text = std::fs::read_to_string(&path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    value
        .get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_string)
        .ok_or_else(|| TomoError::Format(format!("{}: no kind field", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes_append() {
        assert_eq!(with_suffix(Path::new("a/b.c"), ".json"), PathBuf::from("a/b.c.json"));
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = 0.1f64 + 0.2;
        let s = fmt_float(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
        assert_eq!(s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count(), 17);
    }
}
