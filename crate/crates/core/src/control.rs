//! Linear-quadratic control of the local agents around the normal state.
//!
//! In shifted coordinates `X = x + 1`, with the central agent's force
//! linearized as `H0 X0`, the optimal control is
//! `alpha_j = -theta_c (b X0 + d X_j + e Xbar)` where, with `k = theta0 + H0`,
//!
//! ```text
//! a' = 2k a - 2 theta b + theta_c b^2 - theta_c
//! b' = (k + theta) b - theta d - theta0 a + theta_c b d + theta_c - theta e + theta_c b e
//! d' = 2 theta d + theta_c d^2 - theta_c
//! e' = -2 theta0 b + 2 theta e + theta_c (2 d e + e^2)
//! ```
//!
//! and `a(T) = b(T) = d(T) = e(T) = 0`. The long-horizon limits zero the
//! right-hand sides; `d_inf = (-theta + sqrt(theta^2 + theta_c^2)) / theta_c`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::model::{ControlParams, ModelParams};
use crate::numerics::rk4_step;
use crate::sde::FeedbackLaw;

/// Steady state is declared once the coefficients move less than this over
/// the trailing tenth of backward time.
pub const STEADY_TOL: f64 = 1e-8;
pub const ALGEBRAIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub a_inf: f64,
    pub b_inf: f64,
    pub d_inf: f64,
    pub e_inf: f64,
    pub converged: bool,
    /// Set when the values come from the time integration alone.
    pub reduced_precision: bool,
}

impl SteadyState {
    pub fn as_array(&self) -> [f64; 4] {
        [self.a_inf, self.b_inf, self.d_inf, self.e_inf]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiTrajectory {
    /// Series `a`, `b`, `d`, `e` on `[0, T]`.
    pub grid: PathGrid,
    /// Values at `t = 0`.
    pub steady: SteadyState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Coefficients {
    k: f64,
    theta0: f64,
    theta: f64,
    theta_c: f64,
}

impl Coefficients {
    fn new(params: &ModelParams, ctrl: &ControlParams) -> Self {
        Coefficients {
            k: params.theta0 + ctrl.h_cap0,
            theta0: params.theta0,
            theta: params.theta,
            theta_c: ctrl.theta_c,
        }
    }

    /// Forward-time right-hand sides.
    fn rhs(&self, y: &[f64; 4]) -> [f64; 4] {
        let [a, b, d, e] = *y;
        let Coefficients { k, theta0, theta, theta_c } = *self;
        [
            2.0 * k * a - 2.0 * theta * b + theta_c * b * b - theta_c,
            (k + theta) * b - theta * d - theta0 * a + theta_c * b * d + theta_c - theta * e
                + theta_c * b * e,
            2.0 * theta * d + theta_c * d * d - theta_c,
            -2.0 * theta0 * b + 2.0 * theta * e + theta_c * (2.0 * d * e + e * e),
        ]
    }

    /// Jacobian of the `(a, b, e)` equations with respect to `(a, b, e)`.
    fn jacobian_abe(&self, y: &[f64; 4]) -> Matrix3<f64> {
        let [_, b, d, e] = *y;
        let Coefficients { k, theta0, theta, theta_c } = *self;
        Matrix3::new(
            2.0 * k,
            -2.0 * theta + 2.0 * theta_c * b,
            0.0,
            -theta0,
            k + theta + theta_c * d + theta_c * e,
            -theta + theta_c * b,
            0.0,
            -2.0 * theta0,
            2.0 * theta + 2.0 * theta_c * (d + e),
        )
    }
}

pub fn d_inf_closed_form(theta: f64, theta_c: f64) -> f64 {
    let r = theta.hypot(theta_c);
    // (r - theta) / theta_c without cancellation
    theta_c / (r + theta)
}

/// `100 / min(theta_c, theta, 1)`: long enough for the slowest backward
/// relaxation rate to decay many times over.
pub fn default_horizon(params: &ModelParams, theta_c: f64) -> f64 {
    100.0 / theta_c.min(params.theta).min(1.0)
}

fn check(params: &ModelParams, ctrl: &ControlParams) -> Result<()> {
    params.validate()?;
    ctrl.validate()?;
    params.require_h_zero("the control problem")?;
    Ok(())
}

/// Backward RK4 integration from `(0, 0, 0, 0)` at `t = horizon` down to
/// `t = 0` with step `dt`.
pub fn integrate_riccati(params: &ModelParams, ctrl: &ControlParams, dt: f64) -> Result<RiccatiTrajectory> {
    check(params, ctrl)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
    }
    let ratio = ctrl.horizon / dt;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(format!(
            "horizon {} is not an integer multiple of dt {dt}",
            ctrl.horizon
        )));
    }
    let n = n as usize;
    let c = Coefficients::new(params, ctrl);
    let backward = |y: &[f64; 4]| c.rhs(y).map(|v| -v);
    // index s holds backward time s dt, i.e. t = T - s dt
    let mut rev = Vec::with_capacity(n + 1);
    let mut y = [0.0; 4];
    rev.push(y);
    for s in 0..n {
        y = rk4_step(&backward, &y, dt);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: s + 1,
                t: ctrl.horizon - (s + 1) as f64 * dt,
            });
        }
        rev.push(y);
    }
    let tail = (n / 10).max(1);
    let last = rev[n];
    let change = rev[n - tail..]
        .iter()
        .flat_map(|y| y.iter().zip(&last).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max);
    rev.reverse();
    let col = |k: usize| rev.iter().map(|y| y[k]).collect::<Vec<f64>>();
    let grid = PathGrid::uniform(ctrl.horizon, n)?
        .with_series("a", col(0))?
        .with_series("b", col(1))?
        .with_series("d", col(2))?
        .with_series("e", col(3))?;
    Ok(RiccatiTrajectory {
        grid,
        steady: SteadyState {
            a_inf: last[0],
            b_inf: last[1],
            d_inf: last[2],
            e_inf: last[3],
            converged: change < STEADY_TOL,
            reduced_precision: true,
        },
    })
}

/// Max over interior grid points of `|y' - f(y)|`, with `y'` from fourth-order
/// central differences.
pub fn riccati_residual(traj: &RiccatiTrajectory, params: &ModelParams, ctrl: &ControlParams) -> Result<f64> {
    let c = Coefficients::new(params, ctrl);
    let g = &traj.grid;
    let s = [g.series("a")?, g.series("b")?, g.series("d")?, g.series("e")?];
    let h = g.dt();
    let mut worst: f64 = 0.0;
    for i in 2..g.len().saturating_sub(2) {
        let y = [s[0][i], s[1][i], s[2][i], s[3][i]];
        let f = c.rhs(&y);
        for k in 0..4 {
            let d = (s[k][i - 2] - 8.0 * s[k][i - 1] + 8.0 * s[k][i + 1] - s[k][i + 2]) / (12.0 * h);
            worst = worst.max((d - f[k]).abs());
        }
    }
    Ok(worst)
}

/// Max absolute residual of the four algebraic equations.
pub fn algebraic_residual(steady: &SteadyState, params: &ModelParams, ctrl: &ControlParams) -> f64 {
    Coefficients::new(params, ctrl)
        .rhs(&steady.as_array())
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

fn newton_abe(c: &Coefficients, mut y: [f64; 4], fix_a: bool) -> Option<[f64; 4]> {
    let norm = |y: &[f64; 4]| {
        let f = c.rhs(y);
        if fix_a {
            f[0].abs().max(f[3].abs())
        } else {
            f[0].abs().max(f[1].abs()).max(f[3].abs())
        }
    };
    for _ in 0..100 {
        let r = norm(&y);
        if r < 0.1 * ALGEBRAIC_TOL {
            return Some(y);
        }
        let f = c.rhs(&y);
        let jac = c.jacobian_abe(&y);
        let step = if fix_a {
            // (b, e) from the a- and e-equations, which do not involve a
            let m = nalgebra::Matrix2::new(jac[(0, 1)], jac[(0, 2)], jac[(2, 1)], jac[(2, 2)]);
            let dx = m.lu().solve(&nalgebra::Vector2::new(-f[0], -f[3]))?;
            [0.0, dx[0], 0.0, dx[1]]
        } else {
            let dx = jac.lu().solve(&Vector3::new(-f[0], -f[1], -f[3]))?;
            [dx[0], dx[1], 0.0, dx[2]]
        };
        let mut lambda = 1.0;
        loop {
            let trial = [y[0] + lambda * step[0], y[1] + lambda * step[1], y[2], y[3] + lambda * step[3]];
            if norm(&trial) < r || lambda < 1.0 / 1024.0 {
                y = trial;
                break;
            }
            lambda *= 0.5;
        }
    }
    (norm(&y) < ALGEBRAIC_TOL).then_some(y)
}

/// Steady-state coefficients: `d` in closed form, `(a, b, e)` by damped
/// Newton seeded from a long backward integration, which selects the
/// stabilizing root.
pub fn solve_algebraic_riccati(params: &ModelParams, ctrl: &ControlParams) -> Result<SteadyState> {
    check(params, ctrl)?;
    let horizon = default_horizon(params, ctrl.theta_c);
    let dt = (0.01 / params.theta.max(ctrl.theta_c).max(params.theta0 + ctrl.h_cap0).max(1.0)).min(0.01);
    let steps = (horizon / dt).ceil();
    let long = ControlParams {
        horizon: steps * dt,
        ..*ctrl
    };
    let seed = integrate_riccati(params, &long, dt)?.steady;
    let c = Coefficients::new(params, ctrl);
    let d = d_inf_closed_form(params.theta, ctrl.theta_c);
    let fix_a = c.k == 0.0;
    let start = [seed.a_inf, seed.b_inf, d, seed.e_inf];
    match newton_abe(&c, start, fix_a) {
        Some([a, b, d, e]) => Ok(SteadyState {
            a_inf: a,
            b_inf: b,
            d_inf: d,
            e_inf: e,
            converged: true,
            reduced_precision: false,
        }),
        None => Ok(seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeCase {
    /// `theta0 = H0 = 0`.
    Decoupled,
    /// `theta0 << 1`, `H0 = 0`.
    SmallTheta0,
    /// `theta0, H0 << 1`.
    SmallTheta0H0,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeExpansion {
    pub case_id: RegimeCase,
    pub b_inf_approx: f64,
    pub e_inf_approx: f64,
    /// Restoring rate of `Xbar - X0` in the controlled mean dynamics.
    pub effective_coupling: f64,
    /// Additional direct restoring rate on `Xbar`.
    pub direct_control: f64,
}

/// First-order approximations of the steady feedback in the three small
/// parameter regimes. The caller is responsible for the validity range.
pub fn regime_expansion(params: &ModelParams, ctrl: &ControlParams, case_id: RegimeCase) -> RegimeExpansion {
    let (theta0, h) = match case_id {
        RegimeCase::Decoupled => (0.0, 0.0),
        RegimeCase::SmallTheta0 => (params.theta0, 0.0),
        RegimeCase::SmallTheta0H0 => (params.theta0, ctrl.h_cap0),
    };
    let r = params.theta.hypot(ctrl.theta_c);
    let d = d_inf_closed_form(params.theta, ctrl.theta_c);
    let gap = (r - params.theta) / r;
    RegimeExpansion {
        case_id,
        b_inf_approx: -d + (theta0 + h) * d / r,
        e_inf_approx: -theta0 * d / r,
        effective_coupling: r - (theta0 + h) * gap,
        direct_control: h * gap,
    }
}

/// Packages a converged steady state as a stationary feedback law.
pub fn build_feedback(steady: &SteadyState, theta_c: f64) -> Result<FeedbackLaw> {
    if !steady.converged {
        return Err(Error::invalid("Riccati steady state has not converged"));
    }
    if !(theta_c > 0.0) {
        return Err(Error::invalid(format!("theta_c must be > 0, got {theta_c}")));
    }
    if steady.as_array().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite Riccati steady state"));
    }
    Ok(FeedbackLaw::new(steady.b_inf, steady.d_inf, steady.e_inf, theta_c))
}
