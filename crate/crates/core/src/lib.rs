//! Central-agent systemic risk model.
//!
//! A single intrinsically stable central agent `x0` is coupled to the mean of
//! `N` local agents that carry no stabilizing potential of their own. This
//! crate simulates the agent system, computes its mean-field equilibria and
//! Gaussian fluctuations, finds most probable transition paths between the
//! normal state `(-1, -1)` and the failed state `(+1, +1)`, and solves the
//! Riccati equations of the linear-quadratic control problem on the local
//! agents.

pub mod control;
pub mod error;
pub mod fluctuations;
pub mod grid;
pub mod ldp;
pub mod meanfield;
pub mod model;
pub mod numerics;
pub mod potential;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use grid::PathGrid;
pub use model::{parse_config, ControlParams, ExperimentConfig, ModelParams, SimConfig};
pub use potential::QuarticDoubleWell;
