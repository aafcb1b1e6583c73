use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("singular flux: p = {p} < 2 with eps = 0 evaluated at s = 0")]
    SingularFlux { p: f64 },

    #[error("grid mismatch: expected {expected} interior values, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("non-finite value at interior node {node}")]
    NonFinite { node: usize },

    #[error("implicit step did not converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("time step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Monte Carlo path {index}: {source}")]
    PathFailed {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }

    /// True when the root cause is a failed implicit solve.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::SolverFailure { .. } => true,
            Error::AtStep { source, .. } | Error::PathFailed { source, .. } => {
                source.is_solver_failure()
            }
            _ => false,
        }
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::param(name, value, "must be positive and finite"))
    }
}
