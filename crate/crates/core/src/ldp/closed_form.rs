//! Explicit most probable path and rate for `h0 = h = 0`, `sigma0 = 0`.
//!
//! With `tb = theta0 + theta`, `E = exp(-tb T)` and
//! `D = T (1 + E) - 2 (1 - E) / tb`,
//!
//! ```text
//! x0(t)   = [(1 + E)(2t - T) + (2/tb)(exp(-tb t) - exp(-tb (T - t)))] / D
//! xbar(t) = x0(t) + x0'(t) / theta0
//! ```

use super::rate::{rate_degenerate, rate_degenerate_jets, RateValue};
use super::BvpSolution;
use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::model::ModelParams;

/// Evaluates the explicit path on `n_points` uniform points of `[0, T]`.
pub fn closed_form_path_h0_zero(
    params: &ModelParams,
    t_final: f64,
    n_points: usize,
) -> Result<BvpSolution> {
    params.validate()?;
    if params.h0 != 0.0 || params.h != 0.0 || params.sigma0 != 0.0 {
        return Err(Error::invalid(
            "explicit most probable path needs h0 = h = sigma0 = 0",
        ));
    }
    if !(params.theta0 > 0.0) {
        return Err(Error::invalid("explicit most probable path needs theta0 > 0"));
    }
    if n_points < 3 {
        return Err(Error::invalid("need at least 3 grid points"));
    }
    let tb = params.theta0 + params.theta;
    let e = (-tb * t_final).exp();
    let d = t_final * (1.0 + e) + 2.0 / tb * (e - 1.0);
    let grid = PathGrid::uniform(t_final, n_points - 1)?;
    let n = grid.len();
    let (mut x0, mut xbar) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut d1, mut d2, mut d3) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &t in grid.t() {
        let a = (-tb * t).exp();
        let b = (-tb * (t_final - t)).exp();
        let x = ((1.0 + e) * (2.0 * t - t_final) + 2.0 / tb * (a - b)) / d;
        let v = (2.0 * (1.0 + e) - 2.0 * a - 2.0 * b) / d;
        let acc = 2.0 * tb * (a - b) / d;
        let jerk = -2.0 * tb * tb * (a + b) / d;
        x0.push(x);
        xbar.push(x + v / params.theta0);
        d1.push(v);
        d2.push(acc);
        d3.push(jerk);
    }
    let grid = grid
        .with_series("x0", x0)?
        .with_series("xbar", xbar)?
        .with_series("dx0", d1)?
        .with_series("d2x0", d2)?
        .with_series("d3x0", d3)?;
    // on grids too coarse for the difference-based constraint check the
    // exact derivatives are used instead
    let rate_value = match rate_degenerate(&grid, params)? {
        RateValue::Finite(v) => v,
        RateValue::Infeasible { .. } => rate_degenerate_jets(
            grid.dt(),
            grid.series("x0")?,
            grid.series("dx0")?,
            grid.series("d2x0")?,
            params,
        ),
    };
    Ok(BvpSolution {
        grid,
        rate_value,
        ode_residual_norm: 0.0,
        newton_iterations: 0,
        converged: true,
    })
}

/// Analytic infimum of the degenerate rate functional for `h0 = 0`.
pub fn closed_form_rate_h0_zero(params: &ModelParams, t_final: f64) -> f64 {
    let tb = params.theta0 + params.theta;
    let e = (-tb * t_final).exp();
    2.0 * tb * tb / (params.sigma.powi(2) * params.theta0.powi(2)) * (1.0 + e)
        / (t_final * (1.0 + e) - 2.0 * (1.0 - e) / tb)
}

/// Large-`T` decay rate `2 (theta0 + theta)^2 / (T (theta^2 sigma0^2 +
/// theta0^2 sigma^2))`, valid for both noise cases at `h0 = 0`.
pub fn large_t_rate(params: &ModelParams, t_final: f64) -> f64 {
    let tb = params.theta0 + params.theta;
    2.0 * tb * tb
        / (t_final
            * (params.theta.powi(2) * params.sigma0.powi(2)
                + params.theta0.powi(2) * params.sigma.powi(2)))
}
