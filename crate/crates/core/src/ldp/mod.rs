//! Large deviations of `(x0, xbar)` for `h = 0`: rate functionals, most
//! probable transition paths from `(-1, -1)` to `(+1, +1)`, and the resulting
//! systemic-risk estimate `log P ~ -N inf I`.
//!
//! Two noise configurations are handled. In the degenerate case
//! (`sigma0 = 0`) the central agent is slaved to the mean through
//! `x0' = -h0 V'(x0) - theta0 (x0 - xbar)` and the minimizer solves a fourth
//! order equation in `x0`; otherwise both channels carry noise and the
//! minimizer solves a coupled second-order system.

pub mod bvp;
pub mod closed_form;
pub mod collocation;
pub mod continuation;
pub mod optimality;
pub mod rate;
pub mod shooting;

pub use bvp::{
    solve_bvp_degenerate, solve_bvp_degenerate_with, solve_bvp_nondegenerate, solve_bvp_nondegenerate_with, BvpOptions,
    InitialGuess,
};
pub use closed_form::{closed_form_path_h0_zero, closed_form_rate_h0_zero, large_t_rate};
pub use continuation::{continue_in_h0, continue_in_h0_partial, continue_in_h0_with, NoiseCase};
pub use rate::{rate_degenerate, rate_nondegenerate, RateValue};

use crate::error::{Error, Result};
use crate::grid::PathGrid;

/// The crash event: leave `start` and reach `end` by time `horizon`. The
/// solvers pin the endpoint exactly, so `tolerance_delta` is informational.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionEvent {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub horizon: f64,
    pub tolerance_delta: f64,
}

impl TransitionEvent {
    pub fn new(horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be > 0, got {horizon}")));
        }
        Ok(TransitionEvent {
            start: (-1.0, -1.0),
            end: (1.0, 1.0),
            horizon,
            tolerance_delta: 0.0,
        })
    }
}

/// A most probable path. `grid` carries `x0` and `xbar` plus the remaining
/// state components of the first-order system (`dx0`, `d2x0`, `d3x0` in the
/// degenerate case, `dx0`, `dxbar` otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    pub grid: PathGrid,
    /// Rate functional at the path, per agent.
    pub rate_value: f64,
    pub ode_residual_norm: f64,
    pub newton_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpEstimate {
    pub rate_infimum: f64,
    pub n_agents: usize,
    pub log_probability: f64,
}

/// `log P = -N I`, reported in log space.
pub fn transition_probability(rate_infimum: f64, n_agents: usize) -> Result<LdpEstimate> {
    if !(rate_infimum >= 0.0) {
        return Err(Error::invalid(format!(
            "rate infimum must be >= 0, got {rate_infimum}"
        )));
    }
    if n_agents == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    Ok(LdpEstimate {
        rate_infimum,
        n_agents,
        log_probability: -(n_agents as f64) * rate_infimum,
    })
}
