use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular (pivot magnitude {pivot:e})")]
    SingularMatrix { pivot: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("no stabilizing gain could be certified: {0}")]
    NotStabilizable(String),

    #[error("Riccati iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("state is outside the barrier interior (|x| = {norm}, limit {limit})")]
    OutsideInterior { norm: f64, limit: f64 },

    #[error("barrier constraint is undefined at the origin")]
    UndefinedAtOrigin,

    #[error("class-K function evaluated at negative argument {0}")]
    NegativeArgument(f64),

    #[error("integral window not yet warmed up")]
    NotWarmedUp,

    #[error("safety breach at t = {t}: |x| = {norm}")]
    SafetyBreach { t: f64, norm: f64 },

    #[error("numerical divergence at t = {t}: |x| = {norm}")]
    NumericalDivergence { t: f64, norm: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
