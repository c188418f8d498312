//! Crate-wide error type and process exit-code mapping.

use thiserror::Error;

/// Everything that can go wrong across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate metric at grid index {index:?}: |det| = {det:.3e} < {eps:.3e}")]
    DegenerateMetric {
        det: f64,
        eps: f64,
        index: Vec<usize>,
    },

    #[error("signature loss at slice {slice}, grid index {index:?}: {detail}")]
    SignatureLoss {
        slice: usize,
        index: Vec<usize>,
        detail: String,
    },

    #[error("data rejected: uniform Lorentz margin {achieved:.3e} below required {required:.3e}")]
    RejectedData { achieved: f64, required: f64 },

    #[error("inadmissible data: {0}")]
    InadmissibleData(String),

    #[error("iteration diverged at l = {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    #[error("contraction failure after {iterations} iterations; trailing ratios {ratios:?}")]
    ContractionFailure {
        iterations: usize,
        ratios: Vec<f64>,
        norms: Vec<f64>,
    },

    #[error("sweep failed at viscosity {nu0}: {source}")]
    SweepFailure {
        nu0: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient time stencil: need at least {needed} slices, have {have}")]
    Stencil { needed: usize, have: usize },

    #[error("incomplete history: {0}")]
    History(String),

    #[error("grid mismatch: {0}")]
    ShapeMismatch(String),

    #[error("blow-up fit rejected: {0}")]
    Fit(String),

    #[error("curve leaves the computational domain at sample {sample} ({location:?})")]
    CurveDomain { sample: usize, location: Vec<f64> },

    #[error("second derivative of the singular profile is undefined at z = 0")]
    UndefinedPoint,

    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 0 success, 2 validation failure,
    /// 3 contraction failure, 4 signature loss, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SweepFailure { source, .. } => source.exit_code(),
            Error::Config(_)
            | Error::RejectedData { .. }
            | Error::InadmissibleData(_)
            | Error::ShapeMismatch(_)
            | Error::Stencil { .. }
            | Error::History(_)
            | Error::Fit(_)
            | Error::CurveDomain { .. }
            | Error::UndefinedPoint => 2,
            Error::ContractionFailure { .. } | Error::Divergence { .. } => 3,
            Error::DegenerateMetric { .. } | Error::SignatureLoss { .. } => 4,
            Error::Io { .. } | Error::Json(_) => 5,
        }
    }
}
