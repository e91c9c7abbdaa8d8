use std::path::PathBuf;

use thiserror::Error;

use crate::density::DensityMatrix;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too coarse: {points:.2} points across the pump bandwidth, need at least 8")]
    Resolution { points: f64 },

    #[error("band-pass window has no overlap with the joint spectrum")]
    EmptySupport,

    #[error("degenerate post-selection: no cross-path coincidence amplitude (norm {norm:e})")]
    DegeneratePostSelection { norm: f64 },

    #[error("swapped-argument evaluation outside the grid: {0}")]
    InterpolationDomain(String),

    #[error("nonphysical coherence: |D| = {magnitude} exceeds sqrt(alpha*beta) = {bound}")]
    NonphysicalCoherence { magnitude: f64, bound: f64 },

    #[error("unknown projection basis `{0}`")]
    UnknownBasis(String),

    #[error("maximum-likelihood reconstruction did not converge within {iterations} iterations (objective {objective:e})")]
    NonConvergence {
        iterations: usize,
        objective: f64,
        best: Box<DensityMatrix>,
    },

    #[error("visibility undefined: {0}")]
    UndefinedVisibility(String),

    #[error("degradation fit is unidentifiable: {0}")]
    UnidentifiableFit(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// Attach the file a parse or I/O error came from.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// Short, stable tag used as the prefix of CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Format { .. } | Error::UnknownBasis(_) | Error::Io(_) => "format",
            Error::File { source, .. } => source.kind(),
            Error::NonConvergence { .. } => "convergence",
            _ => "numeric",
        }
    }

    /// Process exit code: 2 configuration, 3 numeric/convergence, 4 format.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "format" => 4,
            _ => 3,
        }
    }
}
