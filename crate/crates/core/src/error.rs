use thiserror::Error;

use crate::ldp::BvpSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("state became non-finite at step {step} (t = {t})")]
    Divergence { step: usize, t: f64 },

    #[error("no sign change of the residual on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("drift matrix has a (near) repeated eigenvalue, discriminant = {0:e}")]
    DegenerateSpectrum(f64),

    #[error("drift matrix is not stable, largest eigenvalue = {0}")]
    Unstable(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("Newton iteration stopped after {} iterations with residual {:e}", .0.newton_iterations, .0.ode_residual_norm)]
    NonConvergence(Box<BvpSolution>),

    #[error("continuation failed on h0 interval [{lo}, {hi}]")]
    Continuation {
        lo: f64,
        hi: f64,
        last: Option<Box<BvpSolution>>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}
