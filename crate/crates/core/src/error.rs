use thiserror::Error;

pub type Result<T> = std::result::Result<T, TomoError>;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too coarse: {n} samples, need at least {min}")]
    GridTooCoarse { n: usize, min: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("boundary leak: |f| at the grid ends is {edge:.3e} of the peak (tolerance {tolerance:.1e}); the profile is truncated")]
    BoundaryLeak { edge: f64, tolerance: f64 },

    #[error("support clipped at angle {theta:.6}: density reaches |x'| = {reach:.4} but offsets end at {limit:.4}")]
    SupportClipped { theta: f64, reach: f64, limit: f64 },

    #[error("too few angles: {got}, need at least {min}")]
    TooFewAngles { got: usize, min: usize },

    #[error("conditional undefined on empty fiber p[{index}] (marginal {marginal:.3e})")]
    EmptyFiber { index: usize, marginal: f64 },

    #[error("Nyquist violation: requested |{axis}| up to {requested:.4}, resolvable band is {limit:.4}")]
    NyquistViolation {
        axis: &'static str,
        requested: f64,
        limit: f64,
    },

    #[error("singular angle {theta:.6}: |sin(theta)| = {sin_abs:.3e}")]
    SingularAngle { theta: f64, sin_abs: f64 },

    #[error("data contains angle {theta:.6} with |sin(theta)| below {limit:.1e}")]
    SingularAngleInData { theta: f64, limit: f64 },

    #[error("series truncation insufficient: tail estimate {estimate:.3e} exceeds {tolerance:.1e}")]
    TruncationInsufficient { estimate: f64, tolerance: f64 },

    #[error("shift {shift:.4} leaves the kernel grid (extent {extent:.4})")]
    ShiftOutOfRange { shift: f64, extent: f64 },

    #[error("{m} is not invertible modulo {d}")]
    NotInvertible { m: i64, d: u32 },

    #[error("dimension {0} is not prime")]
    NotPrime(u32),

    #[error("probability row {row} sums to {sum:.12}")]
    RowNotNormalized { row: usize, sum: f64 },

    #[error("negative probability {value:.3e} at row {row}, outcome {outcome}")]
    NegativeProbability {
        row: usize,
        outcome: usize,
        value: f64,
    },

    #[error("state spec has kind {got}, expected {expected}")]
    WrongKind {
        got: &'static str,
        expected: &'static str,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TomoError {
    /// True for failures of a numerical precondition, as opposed to malformed
    /// input or I/O.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            TomoError::InvalidArgument(_)
                | TomoError::Format(_)
                | TomoError::Io(_)
                | TomoError::Json(_)
        )
    }
}
