use thiserror::Error;

use crate::variational::CaseKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("constraint weights ({a}, {b}, {c}) fall in the {kind} case, which this operation cannot handle")]
    Inadmissible { a: f64, b: f64, c: f64, kind: CaseKind },

    #[error("resonant denominator a - 144 c pi^4 vanishes for a = {a}, c = {c}")]
    Resonant { a: f64, c: f64 },

    #[error("degenerate root of the PRC near theta = {theta}: {reason}")]
    DegenerateRoot { theta: f64, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unstable step at t = {t}: |dtheta| = {step} exceeds 0.25")]
    UnstableStep { t: f64, step: f64 },

    #[error("too few samples after burn-in: {got} < {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("the second-order equation degenerates at sigma = {sigma}: the coefficient of the second derivative reaches {coefficient:e}")]
    Singular { sigma: f64, coefficient: f64 },

    #[error("continuation failed at index {index} (sigma = {sigma}): {source}")]
    Continuation {
        index: usize,
        sigma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
