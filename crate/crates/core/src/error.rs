use thiserror::Error;

use crate::model::BodyId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("body `{0}` does not exist in this design")]
    UnknownBody(BodyId),

    #[error("internal coordinate {index} = {value} outside stroke [{min}, {max}]")]
    OutOfStroke { index: usize, value: f64, min: f64, max: f64 },

    #[error("spring coil-bind: extension {extension} m below minimum {min_extension} m")]
    CoilBind { extension: f64, min_extension: f64 },

    #[error("singular configuration (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("forward kinematics did not converge after {iterations} iterations (residual {residual:e} m)")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dynamics diverged at t = {time} s")]
    Divergence { time: f64, last_valid: Box<crate::dynamics::SimState> },

    #[error("base position is not statically feasible: {0}")]
    InfeasibleBase(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("scenario parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (singularity, divergence,
    /// non-convergence) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::NoConvergence { .. }
                | Error::Divergence { .. }
                | Error::CoilBind { .. }
                | Error::InfeasibleBase(_)
        )
    }
}
