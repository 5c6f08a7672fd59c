//! Error type shared by all analysis stages.

use num_complex::Complex64;

/// Failure modes of the analysis pipeline.
///
/// Errors fall into three categories used by callers to decide how to
/// report them: input validation, numerical/tolerance failures, and
/// violated mathematical preconditions.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular constant term in series inversion (condition number {cond:.3e})")]
    SingularConstantTerm { cond: f64 },

    #[error("pencil is not star-symmetric (relative deviation {0:.3e})")]
    NotSymmetric(f64),

    #[error("invalid pencil: {0}")]
    InvalidPencil(String),

    #[error("invalid tolerances: {0}")]
    InvalidTolerances(String),

    #[error("root {sigma0} lies within {dist:.3e} of the search window boundary")]
    WindowTooSmall { sigma0: Complex64, dist: f64 },

    #[error("germ space at {sigma0} has dimension {got}, expected algebraic multiplicity {expected}")]
    GermDimensionMismatch {
        sigma0: Complex64,
        got: usize,
        expected: usize,
    },

    #[error("principal parts are not attached to star-paired roots ({0} vs {1})")]
    NotStarPaired(Complex64, Complex64),

    #[error("root {0} is not on the critical line")]
    NotCritical(Complex64),

    #[error("invariant mismatch: {0}")]
    InvariantMismatch(String),

    #[error("series truncation exhausted at order {order} (needed more coefficients)")]
    TruncationExhausted { order: usize },

    #[error("spectral-flow window remained ambiguous at {sigma0} after retry")]
    AmbiguousWindow { sigma0: Complex64 },

    #[error("quotient Gram form is numerically degenerate (smallest |eigenvalue| {smallest:.3e})")]
    GramDegenerate { smallest: f64 },

    #[error("canonical chain form failed: {0}")]
    CanonicalFormFailure(String),

    #[error("sign condition violated at critical root {0}")]
    SignConditionViolated(Complex64),

    #[error("pencil is not semibounded on the critical line")]
    NotSemibounded,

    #[error("no invariant selfadjoint extension exists (odd-block signature {contribution} at {sigma0})")]
    NoInvariantSelfadjointExtension {
        sigma0: Complex64,
        contribution: i64,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("integrand is not absolutely integrable: {0}")]
    NonIntegrable(String),

    #[error("adaptive quadrature did not converge (best error estimate {err:.3e})")]
    QuadratureNotConverged { err: f64 },

    #[error("malformed pencil JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input (exit code 2).
    Validation,
    /// Tolerance or convergence failure (exit code 3).
    Numerical,
    /// A mathematical precondition of the requested operation fails (exit code 4).
    Precondition,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            NotSymmetric(_) | InvalidPencil(_) | InvalidTolerances(_) | Json(_) => {
                ErrorKind::Validation
            }
            NotHermitian { .. }
            | DimensionMismatch(_)
            | SingularConstantTerm { .. }
            | WindowTooSmall { .. }
            | GermDimensionMismatch { .. }
            | InvariantMismatch(_)
            | TruncationExhausted { .. }
            | AmbiguousWindow { .. }
            | GramDegenerate { .. }
            | CanonicalFormFailure(_)
            | QuadratureNotConverged { .. } => ErrorKind::Numerical,
            NotStarPaired(_, _)
            | NotCritical(_)
            | SignConditionViolated(_)
            | NotSemibounded
            | NoInvariantSelfadjointExtension { .. }
            | PreconditionViolated(_)
            | NonIntegrable(_) => ErrorKind::Precondition,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
