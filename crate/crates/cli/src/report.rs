use serde::Serialize;
use tomokit::io::Artifact;
use tomokit::qudit::trace_norm_distance;
use tomokit::radon::{relative_l2, Density2D};
use tomokit::wigner::{wigner_transform, OperatorKernel, WignerField};
use tomokit::{Result, TomoError};

/// Comparison of a reconstruction with its ground truth. Fields that do not
/// apply to the artifact kind are omitted.
#[derive(Debug, Serialize)]
pub struct Report {
    pub kind: &'static str,
    pub relative_l2: f64,
    pub max_abs_diff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_norm_error: Option<f64>,
    /// |Tr − 1| of the reconstruction, or |∫W − 1| for phase-space fields.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hermiticity_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
}

fn mismatch(a: &Artifact, b: &Artifact) -> TomoError {
    TomoError::InvalidArgument(format!("cannot compare {} with {}", a.kind_name(), b.kind_name()))
}

/// Values of `truth` at the nodes of `like`, interpolating when grids differ.
fn on_grid(truth: &Density2D, like: &Density2D) -> Vec<f64> {
    if truth.same_grid(like) {
        return truth.values().to_vec();
    }
    let (x, y) = (like.x_grid().points(), like.y_grid().points());
    y.iter().flat_map(|&yv| x.iter().map(move |&xv| truth.sample(xv, yv))).collect()
}

fn field_report(kind: &'static str, rec: &Density2D, truth: &Density2D, trace_residual: Option<f64>) -> Report {
    let t = on_grid(truth, rec);
    let max_abs_diff = rec.values().iter().zip(&t).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Report {
        kind,
        relative_l2: relative_l2(rec.values(), &t),
        max_abs_diff,
        trace_norm_error: None,
        trace_residual,
        hermiticity_residual: None,
        min_eigenvalue: None,
    }
}

fn wigner_report(rec: &WignerField, truth: &WignerField) -> Report {
    field_report("wigner", rec.field(), truth.field(), Some((rec.normalization() - 1.0).abs()))
}

fn kernel_report(rec: &OperatorKernel, truth: &OperatorKernel) -> Result<Report> {
    let truth = if truth.grid().same_as(rec.grid()) {
        truth.clone()
    } else {
        OperatorKernel::from_fn(*rec.grid(), |a, b| truth.sample(a, b))
    };
    let diff = rec.combine(1.0, &truth, -1.0)?;
    let norm = |k: &OperatorKernel| k.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(Report {
        kind: "kernel",
        relative_l2: norm(&diff) / norm(&truth),
        max_abs_diff: diff.max_abs(),
        trace_norm_error: Some(trace_norm_distance(&rec.to_matrix(), &truth.to_matrix())),
        trace_residual: Some((rec.trace() - 1.0).norm()),
        hermiticity_residual: Some(rec.hermiticity_residual()),
        min_eigenvalue: Some(rec.eigenvalues()[0]),
    })
}

pub fn compare(rec: &Artifact, truth: &Artifact) -> Result<Report> {
    match (rec, truth) {
        (Artifact::Density(a), Artifact::Density(b)) => {
            Ok(field_report("density2d", a, b, Some((a.mass() - b.mass()).abs())))
        }
        (Artifact::Wigner(a), Artifact::Wigner(b)) => Ok(wigner_report(a, b)),
        (Artifact::Wigner(a), Artifact::Kernel { kernel, .. }) => {
            Ok(wigner_report(a, &wigner_transform(kernel, a.q_grid(), a.p_grid())?))
        }
        (Artifact::Kernel { kernel, .. }, Artifact::Wigner(b)) => {
            Ok(wigner_report(&wigner_transform(kernel, b.q_grid(), b.p_grid())?, b))
        }
        (Artifact::Kernel { kernel: a, .. }, Artifact::Kernel { kernel: b, .. }) => kernel_report(a, b),
        (Artifact::QuditState(a), Artifact::QuditState(b)) => {
            if a.dim() != b.dim() {
                return Err(mismatch(rec, truth));
            }
            let (ma, mb) = (a.matrix(), b.matrix());
            let diff = ma - mb;
            Ok(Report {
                kind: "qudit_state",
                relative_l2: diff.norm() / mb.norm(),
                max_abs_diff: diff.iter().fold(0.0f64, |m, v| m.max(v.norm())),
                trace_norm_error: Some(trace_norm_distance(ma, mb)),
                trace_residual: Some((ma.trace() - 1.0).norm()),
                hermiticity_residual: Some((ma - ma.adjoint()).iter().fold(0.0f64, |m, v| m.max(v.norm()))),
                min_eigenvalue: Some(a.eigenvalues()[0]),
            })
        }
        _ => Err(mismatch(rec, truth)),
    }
}
