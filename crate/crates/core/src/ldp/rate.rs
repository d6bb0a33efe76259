//! Discretized Freidlin-Wentzell action functionals.
//!
//! Integrals use the trapezoidal rule on the path's uniform grid; time
//! derivatives use centered differences inside and one-sided second-order
//! differences at the two ends. Both are second-order accurate.

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::model::ModelParams;
use crate::potential::V;

/// Maximum tolerated `|x0' + h0 V'(x0) + theta0 (x0 - xbar)|` for a supplied
/// `x0` in the degenerate functional.
pub const CONSTRAINT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateValue {
    Finite(f64),
    /// The path violates the slaving constraint of the noiseless central agent.
    Infeasible { max_residual: f64 },
}

impl RateValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            RateValue::Finite(v) => Some(v),
            RateValue::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, RateValue::Finite(_))
    }
}

/// Second-order finite-difference derivative on a uniform grid.
pub fn derivative(y: &[f64], dt: f64) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let s = (y[1] - y[0]) / dt;
            d.fill(s);
        }
        return d;
    }
    for i in 1..n - 1 {
        d[i] = (y[i + 1] - y[i - 1]) / (2.0 * dt);
    }
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dt);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * dt);
    d
}

pub fn trapezoid(f: &[f64], dt: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => dt * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1])),
    }
}

fn check_grid(path: &PathGrid) -> Result<()> {
    if path.len() < 3 {
        return Err(Error::Shape(format!(
            "rate functional needs at least 3 grid points, got {}",
            path.len()
        )));
    }
    Ok(())
}

/// Heun reconstruction of `x0` from `xbar` via the slaving constraint,
/// started at `x0(0) = xbar(0)`.
pub fn reconstruct_x0(xbar: &[f64], dt: f64, params: &ModelParams) -> Vec<f64> {
    let f = |x0: f64, xb: f64| -params.h0 * V.d1(x0) - params.theta0 * (x0 - xb);
    let mut x0 = Vec::with_capacity(xbar.len());
    let mut x = xbar[0];
    x0.push(x);
    for w in xbar.windows(2) {
        let k1 = f(x, w[0]);
        let k2 = f(x + dt * k1, w[1]);
        x += 0.5 * dt * (k1 + k2);
        x0.push(x);
    }
    x0
}

/// `(1 / 2 sigma^2) int (xbar' + theta (xbar - x0))^2 dt` for `sigma0 = 0`.
///
/// The path must carry `xbar`. When it also carries `x0`, that series is
/// checked against the constraint and an infeasible path is reported as
/// [`RateValue::Infeasible`]; otherwise `x0` is reconstructed from `xbar`.
pub fn rate_degenerate(path: &PathGrid, params: &ModelParams) -> Result<RateValue> {
    params.validate()?;
    params.require_h_zero("the (x0, xbar) rate functional")?;
    if params.sigma0 != 0.0 {
        return Err(Error::invalid(format!(
            "degenerate rate functional needs sigma0 = 0 (got {})",
            params.sigma0
        )));
    }
    check_grid(path)?;
    let dt = path.dt();
    let xbar = path.series("xbar")?;
    let x0 = match path.get("x0") {
        Some(x0) => {
            let dx0 = derivative(x0, dt);
            let max_residual = (0..x0.len())
                .map(|i| (dx0[i] + params.h0 * V.d1(x0[i]) + params.theta0 * (x0[i] - xbar[i])).abs())
                .fold(0.0, f64::max);
            if !(max_residual <= CONSTRAINT_TOL) {
                return Ok(RateValue::Infeasible { max_residual });
            }
            x0.to_vec()
        }
        None => reconstruct_x0(xbar, dt, params),
    };
    let dxbar = derivative(xbar, dt);
    let s2 = params.sigma * params.sigma;
    let f: Vec<f64> = (0..xbar.len())
        .map(|i| (dxbar[i] + params.theta * (xbar[i] - x0[i])).powi(2) / (2.0 * s2))
        .collect();
    Ok(RateValue::Finite(trapezoid(&f, dt)))
}

/// Sum of the two action integrals weighted by `1 / 2 sigma0^2` and
/// `1 / 2 sigma^2`.
pub fn rate_nondegenerate(path: &PathGrid, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    params.require_h_zero("the (x0, xbar) rate functional")?;
    if !(params.sigma0 > 0.0) {
        return Err(Error::invalid("non-degenerate rate functional needs sigma0 > 0"));
    }
    check_grid(path)?;
    let dt = path.dt();
    let x0 = path.series("x0")?;
    let xbar = path.series("xbar")?;
    let dx0 = derivative(x0, dt);
    let dxbar = derivative(xbar, dt);
    let (s02, s2) = (params.sigma0.powi(2), params.sigma.powi(2));
    let f: Vec<f64> = (0..x0.len())
        .map(|i| {
            let u0 = dx0[i] + params.h0 * V.d1(x0[i]) + params.theta0 * (x0[i] - xbar[i]);
            let u = dxbar[i] + params.theta * (xbar[i] - x0[i]);
            u0 * u0 / (2.0 * s02) + u * u / (2.0 * s2)
        })
        .collect();
    Ok(trapezoid(&f, dt))
}

/// Degenerate rate from the state jets `(x0, x0', x0'')` on a uniform grid,
/// with `xbar` and `xbar'` eliminated through the slaving constraint.
pub fn rate_degenerate_jets(dt: f64, x: &[f64], v: &[f64], a: &[f64], params: &ModelParams) -> f64 {
    let (h0, th0, th) = (params.h0, params.theta0, params.theta);
    let s2 = params.sigma * params.sigma;
    let f: Vec<f64> = (0..x.len())
        .map(|i| {
            let xbar = x[i] + (v[i] + h0 * V.d1(x[i])) / th0;
            let dxbar = v[i] + (a[i] + h0 * V.d2(x[i]) * v[i]) / th0;
            (dxbar + th * (xbar - x[i])).powi(2) / (2.0 * s2)
        })
        .collect();
    trapezoid(&f, dt)
}

/// Non-degenerate rate from the state jets `(x0, x0', xbar, xbar')`.
pub fn rate_nondegenerate_jets(
    dt: f64,
    x0: &[f64],
    v0: &[f64],
    xbar: &[f64],
    vbar: &[f64],
    params: &ModelParams,
) -> f64 {
    let (s02, s2) = (params.sigma0.powi(2), params.sigma.powi(2));
    let f: Vec<f64> = (0..x0.len())
        .map(|i| {
            let u0 = v0[i] + params.h0 * V.d1(x0[i]) + params.theta0 * (x0[i] - xbar[i]);
            let u = vbar[i] + params.theta * (xbar[i] - x0[i]);
            u0 * u0 / (2.0 * s02) + u * u / (2.0 * s2)
        })
        .collect();
    trapezoid(&f, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(sigma0: f64, h0: f64) -> ModelParams {
        ModelParams::new(h0, 0.0, sigma0, 1.0, 1.0, 1.0, 100).unwrap()
    }

    fn line(t_final: f64, n: usize) -> PathGrid {
        let g = PathGrid::uniform(t_final, n).unwrap();
        let x: Vec<f64> = g.t().iter().map(|t| -1.0 + 2.0 * t / t_final).collect();
        g.with_series("x0", x.clone()).unwrap().with_series("xbar", x).unwrap()
    }

    #[test]
    fn equilibrium_costs_nothing() {
        let g = PathGrid::uniform(5.0, 100).unwrap();
        let g = g.with_series("x0", vec![-1.0; 101]).unwrap().with_series("xbar", vec![-1.0; 101]).unwrap();
        assert_eq!(rate_degenerate(&g, &params(0.0, 0.7)).unwrap(), RateValue::Finite(0.0));
        assert_eq!(rate_nondegenerate(&g, &params(0.5, 0.7)).unwrap(), 0.0);
    }

    #[test]
    fn straight_line_hand_integral() {
        // along the diagonal only the derivative terms survive: (2/T)^2 T
        let (s0, s, t) = (0.5, 1.0, 8.0);
        let p = ModelParams::new(0.0, 0.0, s0, s, 1.0, 1.0, 10).unwrap();
        let got = rate_nondegenerate(&line(t, 400), &p).unwrap();
        let want = (1.0 / (2.0 * s0 * s0) + 1.0 / (2.0 * s * s)) * 4.0 / t;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn derivative_is_exact_on_quadratics() {
        let dt = 0.1;
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * dt).powi(2)).collect();
        let d = derivative(&y, dt);
        for (i, v) in d.iter().enumerate() {
            assert!((v - 2.0 * i as f64 * dt).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_path_flagged() {
        // x0 = xbar = line violates x0' = -theta0 (x0 - xbar) = 0
        match rate_degenerate(&line(10.0, 100), &params(0.0, 0.0)).unwrap() {
            RateValue::Infeasible { max_residual } => assert!((max_residual - 0.2).abs() < 1e-12),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn reconstruction_matches_supplied_x0() {
        let p = params(0.0, 0.0);
        let g = crate::ldp::closed_form_path_h0_zero(&p, 10.0, 4001).unwrap().grid;
        let with = rate_degenerate(&g, &p).unwrap().finite().unwrap();
        let only_xbar = PathGrid::from_times(g.t().to_vec())
            .unwrap()
            .with_series("xbar", g.series("xbar").unwrap().to_vec())
            .unwrap();
        let without = rate_degenerate(&only_xbar, &p).unwrap().finite().unwrap();
        assert!((with / without - 1.0).abs() < 1e-5);
    }

    #[test]
    fn wrong_noise_case_rejected() {
        assert!(rate_degenerate(&line(1.0, 10), &params(0.5, 0.0)).is_err());
        assert!(rate_nondegenerate(&line(1.0, 10), &params(0.0, 0.0)).is_err());
        let short = PathGrid::uniform(1.0, 1).unwrap().with_series("xbar", vec![0.0; 2]).unwrap();
        assert!(matches!(rate_degenerate(&short, &params(0.0, 0.0)), Err(Error::Shape(_))));
    }
}
