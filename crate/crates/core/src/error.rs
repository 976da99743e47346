use thiserror::Error;

/// Errors produced by the matrix core, the dynamics and the stability analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix contains a non-finite entry")]
    NonFiniteInput,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("operation requires a two-level system, got dimension {0}")]
    WrongDimension(usize),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace {found:e} differs from the required {expected}")]
    TraceMismatch { expected: f64, found: f64 },

    #[error("trace {0:e} is below the singularity floor")]
    SingularTrace(f64),

    #[error("reference state is not pure (max |rho^2 - rho| = {0:e})")]
    NotPureReference(f64),

    #[error("closed-form denominator vanishes at tau = {0}")]
    SingularDenominator(f64),

    #[error("Lyapunov equation is singular (eigenvalue pair sums to zero)")]
    SingularLyapunov,

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
