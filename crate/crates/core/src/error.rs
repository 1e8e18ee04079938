use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A weight family descriptor that violates the class conditions.
    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degree {requested} out of range (table holds degrees up to {max})")]
    DegreeOutOfRange { requested: usize, max: usize },

    #[error("could not bracket the MRS equation for t = {t} after {doublings} doublings")]
    Bracket { t: f64, doublings: usize },

    /// The recurrence lost positivity; the discretization cannot support this degree.
    #[error("precision exhausted at degree {degree}: {detail}")]
    PrecisionExhausted { degree: usize, detail: String },

    #[error("discretization did not stabilise: max relative change {change:e} > {tol:e}")]
    Unstable { change: f64, tol: f64 },

    #[error("tridiagonal eigen solver did not converge for eigenvalue {index}")]
    EigenNoConvergence { index: usize },

    #[error("n = {n} too small for x = {x}: need |x| <= {limit}")]
    NTooSmall { n: usize, x: f64, limit: f64 },

    #[error("invalid bounded-variation function: {0}")]
    InvalidBv(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
