use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid-parameter: {0}")]
    InvalidParameter(String),

    #[error("parse-error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("topology-error: {0}")]
    Topology(String),

    #[error("empty-mesh: no triangles found")]
    EmptyMesh,

    #[error("assembly-error: {0}")]
    Assembly(String),

    #[error("point-outside-mesh: ({x}, {y})")]
    PointOutsideMesh { x: f64, y: f64 },

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("solver-failure: relative residual {residual:e} after {iterations} iterations (tolerance {tol:e})")]
    SolverFailure { residual: f64, iterations: usize, tol: f64 },

    #[error("ellipticity-violation: tau = {tau} exceeds the admissible maximum {max_tau}")]
    EllipticityViolation { tau: f64, max_tau: f64 },

    #[error("degenerate-magnetization at vertex {vertex}: |m| = {norm}")]
    DegenerateMagnetization { vertex: usize, norm: f64 },

    #[error("io-error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
