use thiserror::Error;

use crate::model::EpiState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("degenerate denominator in {0}")]
    Degenerate(&'static str),

    #[error("state {0:?} carries no running cost: the stopping time has been reached")]
    StoppedState(EpiState),

    #[error("non-finite or out-of-range beta sample {value} at index {index}")]
    InvalidBeta { index: usize, value: f64 },

    #[error("probability mass violated at t = {t}: {detail}")]
    MassViolation { t: f64, detail: String },

    #[error("filter blew up at step {step}")]
    FilterBlowUp { step: usize },

    #[error("time step {dt} violates the CFL bound {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("no stationary solution within T = {t_end}: last increment {residual:e}")]
    NotStationary { t_end: f64, residual: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("negative density {value:e} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("attribute `{theta}`: {source}")]
    Attribute {
        theta: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }

    pub(crate) fn for_attribute(self, theta: &str) -> Self {
        Error::Attribute { theta: theta.to_string(), source: Box::new(self) }
    }
}
