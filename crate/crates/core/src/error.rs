use thiserror::Error;

pub type Result<T, E = KornError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KornError {
    /// A point, parameter or thickness outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("mesh error in element {element}: {reason}")]
    Mesh { element: usize, reason: String },

    #[error("assembly error in element {element}: {reason}")]
    Assembly { element: usize, reason: String },

    /// The eigensolver hit its iteration cap. `last_ritz` is the best
    /// estimate of the smallest pencil eigenvalue at that point.
    #[error("eigensolver did not converge after {iterations} restarts (last Ritz value {last_ritz:.6e}, residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        last_ritz: f64,
        residual: f64,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("quadrature under-resolved: relative change {relative_change:.3e} under refinement")]
    Resolution { relative_change: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl KornError {
    pub fn domain(msg: impl Into<String>) -> Self {
        KornError::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        KornError::Configuration(msg.into())
    }
}
