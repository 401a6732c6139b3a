use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("rank mismatch: cannot apply {op} to a {rank} field")]
    RankMismatch { op: &'static str, rank: &'static str },

    #[error("inadmissible state: {0}")]
    Inadmissible(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{solver} failed to converge after {iterations} iterations (residual {residual:.3e}, tolerance {tolerance:.1e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("time step too large: {0}")]
    StepTooLarge(String),

    #[error("galerkin trajectory blew up at t = {t}: sum |g|^2 = {energy:.3e}")]
    BlowUp { t: f64, energy: f64 },

    #[error("maximum principle violated: {0}")]
    Violation(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
