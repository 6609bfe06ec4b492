use thiserror::Error;

/// Errors raised by the solver, diagnostics and IO layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("negative density {value} at cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },

    #[error("non-finite value at cell {cell}")]
    NonFinite { cell: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Newton and Picard iterations failed: {iterations} iterations, residual {residual:e} (dt = {dt:e})")]
    NonlinearSolve {
        iterations: usize,
        residual: f64,
        dt: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("trajectory of drift `{drift}` left the domain at ({x:.6}, {y:.6}) by {distance:e}")]
    LeftDomain {
        drift: String,
        x: f64,
        y: f64,
        distance: f64,
    },

    #[error("atom count {atoms} exceeds cap {cap}")]
    AtomCap { atoms: usize, cap: usize },

    #[error("measures have different total mass: {0:e} vs {1:e}")]
    MassMismatch(f64, f64),

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("CFL condition violated: {0}")]
    Cfl(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("substep {index} failed: {source}")]
    Substep {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration errors: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("checksum mismatch for {0}")]
    Checksum(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
