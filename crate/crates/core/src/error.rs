use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse `{field}`: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("invalid domain [{x0}, {x1}]: need 0 < x0 < x1 < inf")]
    Domain { x0: f64, x1: f64 },
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("mesh needs at least {min} cells, got {n}")]
    MeshTooSmall { n: usize, min: usize },
    #[error("value {value} outside the table range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("no sign change of the characteristic function found within |lambda| <= {bound}")]
    BracketExpansion { bound: f64 },
    #[error("lambda = {lambda} is not a root of the characteristic function (xi = {xi})")]
    NotARoot { lambda: f64, xi: f64 },
    #[error("resolvent is singular at lambda = {lambda} (xi = {xi})")]
    SingularResolvent { lambda: f64, xi: f64 },
    #[error("boundary time step {dt_b} exceeds the first interior transit time; use dt_b <= {suggested}")]
    Causality { dt_b: f64, suggested: f64 },
    #[error("time step {dt} violates the {which} bound (limit {limit})")]
    StepBound {
        which: &'static str,
        dt: f64,
        limit: f64,
    },
    #[error("non-finite state after t = {last_good_time}")]
    BlowUp { last_good_time: f64 },
    #[error("rate fit needs at least {required} samples, got {found}")]
    InsufficientSamples { found: usize, required: usize },
    #[error("non-positive norm {norm} at t = {t}")]
    NonPositiveNorm { t: f64, norm: f64 },
    #[error("states live on different meshes ({left} vs {right} cells)")]
    MeshMismatch { left: usize, right: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
