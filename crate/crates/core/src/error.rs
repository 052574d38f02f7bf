use thiserror::Error;

/// Errors surfaced by the solver, the path engine and the verification suites.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A model parameter violates its admissibility constraint. `index` is the
    /// piecewise segment (0 for constant coefficients) where the violation
    /// was first detected.
    #[error("invalid parameters: {constraint} (segment {index})")]
    InvalidParams { constraint: String, index: usize },

    /// A strategy or jump leaves the domain where wealth stays positive.
    #[error("not admissible: {0}")]
    NonAdmissible(String),

    /// The requested operation only makes sense in a restricted regime
    /// (e.g. direct horizon sampling outside the Cox case).
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// An iteration failed to converge or a quantity left its numeric domain.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The initial triple handed to the line search does not bracket a maximum.
    #[error("bracket error: {0}")]
    BracketError(String),

    /// Non-finite values fed into an estimator.
    #[error("domain error: {0}")]
    DomainError(String),

    /// A per-path failure inside the Monte Carlo engine.
    #[error("path {path_index}: {source}")]
    PathError {
        path_index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(constraint: impl Into<String>, index: usize) -> Self {
        Error::InvalidParams {
            constraint: constraint.into(),
            index,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
