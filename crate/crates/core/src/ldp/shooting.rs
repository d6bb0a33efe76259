//! Single shooting on the Euler-Lagrange systems, kept as a diagnostic.
//!
//! The free initial components are adjusted by Newton until the right
//! boundary conditions hold. The linearized flow grows like `exp(tb T)`, so
//! beyond moderate horizons the endpoint map is too ill-conditioned for this
//! to work; [`endpoint_miss`] measures that sensitivity for a collocation
//! solution.

use super::bvp::{Degenerate, NonDegenerate};
use super::collocation::BvpSystem;
use super::BvpSolution;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::rk4_step;

const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingReport {
    /// Full initial state after the last iterate.
    pub initial: [f64; 4],
    /// Max violation of the right boundary conditions, infinite if the
    /// trajectory blew up.
    pub endpoint_miss: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn system(params: &ModelParams) -> Result<Box<dyn BvpSystem>> {
    params.validate()?;
    if params.h != 0.0 {
        return Err(Error::invalid("shooting needs h = 0"));
    }
    if params.sigma0 == 0.0 {
        if !(params.theta0 > 0.0) {
            return Err(Error::invalid("degenerate shooting needs theta0 > 0"));
        }
        Ok(Box::new(Degenerate {
            h0: params.h0,
            th0: params.theta0,
            th: params.theta,
        }))
    } else {
        Ok(Box::new(NonDegenerate::new(params)))
    }
}

fn integrate(sys: &dyn BvpSystem, y0: [f64; 4], t_final: f64, steps: usize) -> Option<[f64; 4]> {
    let f = |y: &[f64; 4]| {
        let mut out = [0.0; 4];
        sys.rhs(0.0, y, &mut out);
        out
    };
    let h = t_final / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        y = rk4_step(&f, &y, h);
        if !y.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    Some(y)
}

fn miss(sys: &dyn BvpSystem, y0: [f64; 4], t_final: f64, steps: usize) -> Option<[f64; 2]> {
    let y = integrate(sys, y0, t_final, steps)?;
    let right = sys.right_bc();
    Some([y[right[0].0] - right[0].1, y[right[1].0] - right[1].1])
}

fn free_components(sys: &dyn BvpSystem) -> [usize; 2] {
    let fixed: Vec<usize> = sys.left_bc().iter().map(|&(k, _)| k).collect();
    let free: Vec<usize> = (0..4).filter(|k| !fixed.contains(k)).collect();
    [free[0], free[1]]
}

/// Newton shooting from `free_guess` for the components not fixed at
/// `t = 0` (`(x0'', x0''')` degenerate, `(x0', xbar')` otherwise), with
/// `steps` RK4 steps per trajectory.
pub fn shoot(
    params: &ModelParams,
    t_final: f64,
    steps: usize,
    free_guess: [f64; 2],
    max_iterations: usize,
) -> Result<ShootingReport> {
    if !(t_final > 0.0) || steps == 0 {
        return Err(Error::invalid("shooting needs t_final > 0 and steps > 0"));
    }
    let sys = system(params)?;
    let sys = sys.as_ref();
    let free = free_components(sys);
    let mut y0 = [0.0; 4];
    for (k, v) in sys.left_bc() {
        y0[k] = v;
    }
    y0[free[0]] = free_guess[0];
    y0[free[1]] = free_guess[1];

    let norm = |m: [f64; 2]| m[0].abs().max(m[1].abs());
    let mut iterations = 0;
    let Some(mut m) = miss(sys, y0, t_final, steps) else {
        return Ok(ShootingReport {
            initial: y0,
            endpoint_miss: f64::INFINITY,
            iterations,
            converged: false,
        });
    };
    while norm(m) > TOLERANCE && iterations < max_iterations {
        iterations += 1;
        let mut jac = [[0.0; 2]; 2];
        for (j, &k) in free.iter().enumerate() {
            let dh = 1e-7 * y0[k].abs().max(1.0);
            let mut yp = y0;
            yp[k] += dh;
            let Some(mp) = miss(sys, yp, t_final, steps) else {
                return Ok(ShootingReport {
                    initial: y0,
                    endpoint_miss: norm(m),
                    iterations,
                    converged: false,
                });
            };
            jac[0][j] = (mp[0] - m[0]) / dh;
            jac[1][j] = (mp[1] - m[1]) / dh;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !det.is_finite() || det == 0.0 {
            break;
        }
        let d0 = (jac[1][1] * m[0] - jac[0][1] * m[1]) / det;
        let d1 = (jac[0][0] * m[1] - jac[1][0] * m[0]) / det;
        // halve until the miss decreases
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= 1.0 / 1024.0 {
            let mut trial = y0;
            trial[free[0]] -= lambda * d0;
            trial[free[1]] -= lambda * d1;
            if let Some(mt) = miss(sys, trial, t_final, steps) {
                if norm(mt) < norm(m) {
                    accepted = Some((trial, mt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, mt)) = accepted else {
            break;
        };
        y0 = trial;
        m = mt;
    }
    Ok(ShootingReport {
        initial: y0,
        endpoint_miss: norm(m),
        iterations,
        converged: norm(m) <= TOLERANCE,
    })
}

/// Integrates forward from the initial state of a collocation solution and
/// returns how far the trajectory lands from the right boundary conditions.
pub fn endpoint_miss(sol: &BvpSolution, params: &ModelParams, steps: usize) -> Result<f64> {
    let sys = system(params)?;
    let sys = sys.as_ref();
    let g = &sol.grid;
    let names: [&str; 4] = if params.sigma0 == 0.0 {
        ["x0", "dx0", "d2x0", "d3x0"]
    } else {
        ["x0", "xbar", "dx0", "dxbar"]
    };
    let mut y0 = [0.0; 4];
    for (k, name) in names.iter().enumerate() {
        y0[k] = g.series(name)?[0];
    }
    Ok(miss(sys, y0, g.t_final(), steps).map_or(f64::INFINITY, |m| m[0].abs().max(m[1].abs())))
}
