use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("grids are not aligned: {field} differs ({left} vs {right})")]
    Alignment {
        field: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("empty source set")]
    EmptySources,

    #[error("invalid grade rule: {0}")]
    InvalidRule(String),

    #[error("invalid pairwise matrix: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Matrix(Vec<crate::ahp::MatrixViolation>),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("pairwise judgments are inconsistent: CR = {cr:.4} exceeds {threshold}")]
    Inconsistent { cr: f64, threshold: f64 },

    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("criteria groups do not partition the factors: {0}")]
    Partition(String),

    #[error("kriging needs at least 2 sample points, got {0}")]
    TooFewPoints(usize),

    #[error("sample points {first} and {second} share coordinates ({x}, {y})")]
    DuplicatePoints {
        first: usize,
        second: usize,
        x: f64,
        y: f64,
    },

    #[error("variogram fit needs at least 3 non-empty bins, got {0}")]
    TooFewBins(usize),

    #[error("singular kriging system")]
    Singular,

    #[error("score {0} lies outside the class breaks")]
    ScoreOutOfRange(f64),

    #[error("invalid class breaks: {0}")]
    Breaks(String),

    #[error("invalid energy parameters: {0}")]
    Energy(String),

    #[error("criterion {0} cannot be excluded: irradiation is the resource being assessed, every other criterion only modulates it")]
    GhiExclusion(String),

    #[error("unknown criterion {0}")]
    UnknownCriterion(String),

    #[error("invalid scenario config: {0}")]
    Config(String),

    #[error("path {} escapes the data root", .0.display())]
    Sandbox(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png encoding failed: {0}")]
    Png(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input (config, matrix, grids, missing
    /// input files) rather than the environment. Front ends map these to a
    /// distinct exit code.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Png(_) | Error::NonConvergence { .. } => false,
            _ => true,
        }
    }
}
