use thiserror::Error;

use crate::algorithms::RunTrace;
use crate::dynamics::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("stepsize too large: mu * s = {0} must be below 1")]
    StepsizeTooLarge(f64),

    #[error("tolerance not reached (best estimate {best}, achieved {achieved:e})")]
    ToleranceNotReached { best: f64, achieved: f64 },

    #[error("unsupported diagnostic: {0}")]
    Unsupported(String),

    #[error("missing capability: {0}")]
    Capability(String),

    #[error("subsolver failure: {0}")]
    Subsolver(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("run diverged at iteration {}", .0.records.len())]
    DivergedRun(Box<RunTrace>),

    #[error("flow diverged at t = {}", .0.times.last().copied().unwrap_or(0.0))]
    DivergedFlow(Box<Trajectory>),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
