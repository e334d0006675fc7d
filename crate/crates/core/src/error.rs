use thiserror::Error;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupling index n = {n} is outside the tabulated range")]
    OutOfRange { n: i64 },

    #[error("degenerate coupling sum at n = {n}: alpha1(n)^2 + alpha2(n)^2 vanishes")]
    DegenerateSum { n: i64 },

    #[error("coupling validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("drift is not stable: eigenvalue real part {re:e} is not negative")]
    Unstable { re: f64 },

    #[error("eigenvalue label matching is ambiguous: {0}")]
    AmbiguousLabels(String),

    #[error("eigenvector matrix is numerically singular (condition estimate {0:e})")]
    NotDiagonalizable(f64),

    #[error("resonant denominator |conj(lambda_m) + lambda_n| = {0:e} below threshold")]
    Resonance(f64),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("residual {residual:e} exceeds tolerance {tol:e}")]
    Inaccurate { residual: f64, tol: f64 },

    #[error("method unavailable: {0}")]
    MethodUnavailable(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("trajectory is no longer finite at t = {t}")]
    BlowUp { t: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateSum { .. } | Error::Validation(_) => 2,
            Error::Unstable { .. }
            | Error::AmbiguousLabels(_)
            | Error::NotDiagonalizable(_)
            | Error::Resonance(_)
            | Error::Factorization(_)
            | Error::Inaccurate { .. }
            | Error::Fit(_)
            | Error::BlowUp { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
