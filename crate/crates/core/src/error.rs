use thiserror::Error;

/// Failures of the fixed-step integrator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation diverged at t = {time}: {reason}")]
    Diverged { time: f64, reason: String },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
}

/// A parameter set violating one of its documented constraints.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid `{key}`: {constraint}")]
pub struct ParamError {
    pub key: String,
    pub constraint: String,
}

impl ParamError {
    pub fn new(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            constraint: constraint.into(),
        }
    }
}
