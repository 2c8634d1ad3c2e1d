use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("point lies outside the domain")]
    OutsideDomain,

    #[error("shooting failed to bracket the first eigenvalue: {0}")]
    ShootingBracket(String),

    #[error("profile too coarse: relative refinement change {0:.3e}")]
    ProfileTooCoarse(f64),

    #[error("mesh generation failed: {0}")]
    Mesh(String),

    #[error("linear solver failure: {0}")]
    LinearSolve(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
