use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis and parameters disagree: {0}")]
    Mismatch(String),

    #[error("unsupported symmetry: {0}")]
    UnsupportedSymmetry(String),

    #[error("eigensolver did not converge after {iterations} iterations (best residuals {residuals:?})")]
    NotConverged { iterations: usize, residuals: Vec<f64> },

    #[error("DMRG did not converge after {sweeps} sweeps (energy trace {energies:?})")]
    SweepsExhausted { sweeps: usize, energies: Vec<f64> },

    #[error("bond dimension exhausted: truncation error {error:e} exceeds ceiling {ceiling:e}")]
    BondDimensionExhausted { error: f64, ceiling: f64 },

    #[error("orthogonality leakage {leakage:e} above tolerance {tolerance:e}")]
    OrthogonalityLeakage { leakage: f64, tolerance: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("missing upstream table for `{key}`: {message}")]
    MissingInput { key: String, message: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
