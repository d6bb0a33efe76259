//! Euler-Lagrange boundary value problems for the most probable path.
//!
//! Degenerate case (`sigma0 = 0`), state `(x, x', x'', x''')` with `x = x0`:
//!
//! ```text
//! x'''' = tb^2 x'' - h0 [V'''' x'^3 + 3 V''' x' x'' - theta0 V''' x'^2 - 2 theta0 V'' x'']
//!         - h0^2 V'' [-V''' x'^2 - V'' x'' + theta^2 V']
//! x(0) = -1, x'(0) = 0, x(T) = 1, x'(T) = 0
//! xbar = x + (x' + h0 V'(x)) / theta0
//! ```
//!
//! Non-degenerate case, state `(x0, xbar, x0', xbar')`:
//!
//! ```text
//! x0''   = (s^2 theta0 - s0^2 theta) / s^2 xbar' + (s^2 theta0^2 + s0^2 theta^2) / s^2 (x0 - xbar)
//!          + h0 theta0 [V' + V'' (x0 - xbar)] + h0^2 V' V''
//! xbar'' = (s0^2 theta - s^2 theta0) / s0^2 x0' + (s0^2 theta^2 + s^2 theta0^2) / s0^2 (xbar - x0)
//!          - h0 (s^2 theta0 / s0^2) V'
//! ```
//!
//! with both components pinned to `-1` at `t = 0` and `+1` at `t = T`.

use super::collocation::{self, BvpSystem, NewtonOptions};
use super::rate::{derivative, rate_degenerate_jets, rate_nondegenerate_jets};
use super::BvpSolution;
use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::model::ModelParams;
use crate::potential::V;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// `x = -1` everywhere.
    ConstantMinusOne,
    /// `x = -1 + 2t/T`.
    StraightLine,
    /// Both presets; the converged result with the lower rate wins.
    Auto,
    /// A previous path on the same horizon, e.g. a continuation seed.
    Path(PathGrid),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpOptions {
    pub newton: NewtonOptions,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions {
            newton: NewtonOptions::default(),
        }
    }
}

pub(crate) struct Degenerate {
    pub(crate) h0: f64,
    pub(crate) th0: f64,
    pub(crate) th: f64,
}

impl BvpSystem for Degenerate {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        let (x, v, a) = (y[0], y[1], y[2]);
        let (h0, th0, th) = (self.h0, self.th0, self.th);
        let tb = th0 + th;
        let (v1, v2, v3, v4) = (V.d1(x), V.d2(x), V.d3(x), V.d4(x));
        out[0] = v;
        out[1] = a;
        out[2] = y[3];
        out[3] = tb * tb * a
            - h0 * (v4 * v * v * v + 3.0 * v3 * v * a - th0 * v3 * v * v - 2.0 * th0 * v2 * a)
            - h0 * h0 * v2 * (-v3 * v * v - v2 * a + th * th * v1);
    }

    fn jacobian(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        let (x, v, a) = (y[0], y[1], y[2]);
        let (h0, th0, th) = (self.h0, self.th0, self.th);
        let tb = th0 + th;
        let (v1, v2, v3, v4) = (V.d1(x), V.d2(x), V.d3(x), V.d4(x));
        let g = -v3 * v * v - v2 * a + th * th * v1;
        // V''' = 6x, V'''' = 6, so d/dx V''' = 6 and d/dx V'''' = 0
        let dx = -h0 * (3.0 * v4 * v * a - th0 * v4 * v * v - 2.0 * th0 * v3 * a)
            - h0 * h0 * (v3 * g + v2 * (-v4 * v * v - v3 * a + th * th * v2));
        let dv = -h0 * (3.0 * v4 * v * v + 3.0 * v3 * a - 2.0 * th0 * v3 * v) + 2.0 * h0 * h0 * v2 * v3 * v;
        let da = tb * tb - h0 * (3.0 * v3 * v - 2.0 * th0 * v2) + h0 * h0 * v2 * v2;
        out.fill(0.0);
        out[1] = 1.0;
        out[4 + 2] = 1.0;
        out[8 + 3] = 1.0;
        out[12] = dx;
        out[13] = dv;
        out[14] = da;
    }

    fn left_bc(&self) -> Vec<(usize, f64)> {
        vec![(0, -1.0), (1, 0.0)]
    }

    fn right_bc(&self) -> Vec<(usize, f64)> {
        vec![(0, 1.0), (1, 0.0)]
    }
}

pub(crate) struct NonDegenerate {
    h0: f64,
    th0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    c4: f64,
    c5: f64,
}

impl NonDegenerate {
    pub(crate) fn new(p: &ModelParams) -> Self {
        let (s02, s2) = (p.sigma0.powi(2), p.sigma.powi(2));
        let (th0, th) = (p.theta0, p.theta);
        NonDegenerate {
            h0: p.h0,
            th0,
            c1: (s2 * th0 - s02 * th) / s2,
            c2: (s2 * th0 * th0 + s02 * th * th) / s2,
            c3: (s02 * th - s2 * th0) / s02,
            c4: (s02 * th * th + s2 * th0 * th0) / s02,
            c5: p.h0 * s2 * th0 / s02,
        }
    }
}

impl BvpSystem for NonDegenerate {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        let (x0, xb, v0, vb) = (y[0], y[1], y[2], y[3]);
        let (v1, v2) = (V.d1(x0), V.d2(x0));
        out[0] = v0;
        out[1] = vb;
        out[2] = self.c1 * vb
            + self.c2 * (x0 - xb)
            + self.h0 * self.th0 * (v1 + v2 * (x0 - xb))
            + self.h0 * self.h0 * v1 * v2;
        out[3] = self.c3 * v0 + self.c4 * (xb - x0) - self.c5 * v1;
    }

    fn jacobian(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        let (x0, xb) = (y[0], y[1]);
        let (v1, v2, v3) = (V.d1(x0), V.d2(x0), V.d3(x0));
        let (h0, th0) = (self.h0, self.th0);
        out.fill(0.0);
        out[2] = 1.0;
        out[4 + 3] = 1.0;
        out[8] = self.c2 + h0 * th0 * (2.0 * v2 + v3 * (x0 - xb)) + h0 * h0 * (v2 * v2 + v1 * v3);
        out[9] = -self.c2 - h0 * th0 * v2;
        out[11] = self.c1;
        out[12] = -self.c4 - self.c5 * v2;
        out[13] = self.c4;
        out[14] = self.c3;
    }

    fn left_bc(&self) -> Vec<(usize, f64)> {
        vec![(0, -1.0), (1, -1.0)]
    }

    fn right_bc(&self) -> Vec<(usize, f64)> {
        vec![(0, 1.0), (1, 1.0)]
    }
}

fn check_common(params: &ModelParams, t_final: f64, mesh_points: usize) -> Result<()> {
    params.validate()?;
    params.require_h_zero("the (x0, xbar) transition problem")?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::invalid(format!("horizon must be > 0, got {t_final}")));
    }
    if mesh_points < 3 {
        return Err(Error::invalid("mesh needs at least 3 points"));
    }
    Ok(())
}

/// Linear interpolation of `y` (on the uniform grid of `src`) at `t`.
fn interp(src: &PathGrid, y: &[f64], t: f64) -> f64 {
    let dt = src.dt();
    let last = src.len() - 1;
    let s = (t - src.t()[0]) / dt;
    if s <= 0.0 {
        return y[0];
    }
    if s >= last as f64 {
        return y[last];
    }
    let i = (s.floor() as usize).min(last - 1);
    let w = s - i as f64;
    (1.0 - w) * y[i] + w * y[i + 1]
}

/// Samples `names` from `path` on `mesh`; missing derivative columns are
/// filled by finite differences of the preceding column.
fn sample(path: &PathGrid, mesh: &PathGrid, names: &[&str], derived_from: &[Option<usize>]) -> Result<Vec<Vec<f64>>> {
    if (path.t_final() - mesh.t_final()).abs() > 1e-9 * mesh.t_final() {
        return Err(Error::Shape(format!(
            "initial guess spans [0, {}], problem horizon is {}",
            path.t_final(),
            mesh.t_final()
        )));
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let col = match (path.get(name), derived_from[k]) {
            (Some(src), _) => mesh.t().iter().map(|&t| interp(path, src, t)).collect(),
            (None, Some(j)) => derivative(&cols[j], mesh.dt()),
            (None, None) => return Err(Error::Shape(format!("initial guess lacks series `{name}`"))),
        };
        cols.push(col);
    }
    Ok(cols)
}

fn interleave(cols: &[Vec<f64>]) -> Vec<f64> {
    let m = cols[0].len();
    let mut y = Vec::with_capacity(m * cols.len());
    for i in 0..m {
        for c in cols {
            y.push(c[i]);
        }
    }
    y
}

fn column(y: &[f64], dim: usize, k: usize) -> Vec<f64> {
    y.iter().skip(k).step_by(dim).copied().collect()
}

fn preset(mesh: &PathGrid, straight: bool, names: usize) -> Vec<Vec<f64>> {
    let t_final = mesh.t_final();
    let x: Vec<f64> = mesh
        .t()
        .iter()
        .map(|t| if straight { -1.0 + 2.0 * t / t_final } else { -1.0 })
        .collect();
    let slope = vec![if straight { 2.0 / t_final } else { 0.0 }; mesh.len()];
    let zero = vec![0.0; mesh.len()];
    match names {
        // (x, x', x'', x''')
        4 => vec![x, slope, zero.clone(), zero],
        // (x0, xbar, x0', xbar') handled by caller
        _ => vec![x.clone(), x, slope.clone(), slope],
    }
}

fn pick_best(
    a: Result<BvpSolution>,
    b: Result<BvpSolution>,
) -> Result<BvpSolution> {
    match (a, b) {
        (Ok(a), Ok(b)) => Ok(if b.rate_value < a.rate_value { b } else { a }),
        (Ok(a), Err(_)) | (Err(_), Ok(a)) => Ok(a),
        (Err(Error::NonConvergence(a)), Err(Error::NonConvergence(b))) => {
            Err(Error::NonConvergence(if b.ode_residual_norm < a.ode_residual_norm { b } else { a }))
        }
        (Err(e), _) => Err(e),
    }
}

/// Most probable path for `sigma0 = 0` on `mesh_points` uniform nodes.
pub fn solve_bvp_degenerate(
    params: &ModelParams,
    t_final: f64,
    mesh_points: usize,
    initial_guess: &InitialGuess,
) -> Result<BvpSolution> {
    solve_bvp_degenerate_with(params, t_final, mesh_points, initial_guess, &BvpOptions::default())
}

pub fn solve_bvp_degenerate_with(
    params: &ModelParams,
    t_final: f64,
    mesh_points: usize,
    initial_guess: &InitialGuess,
    opts: &BvpOptions,
) -> Result<BvpSolution> {
    check_common(params, t_final, mesh_points)?;
    if params.sigma0 != 0.0 {
        return Err(Error::invalid("degenerate problem needs sigma0 = 0"));
    }
    if !(params.theta0 > 0.0) {
        return Err(Error::invalid("degenerate problem needs theta0 > 0"));
    }
    let mesh = PathGrid::uniform(t_final, mesh_points - 1)?;
    let cols = match initial_guess {
        InitialGuess::Auto => {
            let a = solve_bvp_degenerate_with(params, t_final, mesh_points, &InitialGuess::ConstantMinusOne, opts);
            let b = solve_bvp_degenerate_with(params, t_final, mesh_points, &InitialGuess::StraightLine, opts);
            return pick_best(a, b);
        }
        InitialGuess::ConstantMinusOne => preset(&mesh, false, 4),
        InitialGuess::StraightLine => preset(&mesh, true, 4),
        InitialGuess::Path(path) => sample(
            path,
            &mesh,
            &["x0", "dx0", "d2x0", "d3x0"],
            &[None, Some(0), Some(1), Some(2)],
        )?,
    };
    let sys = Degenerate {
        h0: params.h0,
        th0: params.theta0,
        th: params.theta,
    };
    let res = collocation::solve(&sys, mesh.t(), interleave(&cols), &opts.newton)?;
    let (x, v, a, j) = (column(&res.y, 4, 0), column(&res.y, 4, 1), column(&res.y, 4, 2), column(&res.y, 4, 3));
    let xbar: Vec<f64> = x
        .iter()
        .zip(&v)
        .map(|(&x, &v)| x + (v + params.h0 * V.d1(x)) / params.theta0)
        .collect();
    let rate_value = rate_degenerate_jets(mesh.dt(), &x, &v, &a, params);
    let grid = mesh
        .with_series("x0", x)?
        .with_series("xbar", xbar)?
        .with_series("dx0", v)?
        .with_series("d2x0", a)?
        .with_series("d3x0", j)?;
    finish(grid, rate_value, &res)
}

fn finish(grid: PathGrid, rate_value: f64, res: &collocation::CollocationResult) -> Result<BvpSolution> {
    let sol = BvpSolution {
        grid,
        rate_value,
        ode_residual_norm: res.residual,
        newton_iterations: res.iterations,
        converged: res.converged,
    };
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::NonConvergence(Box::new(sol)))
    }
}

/// Most probable path for `sigma0 > 0` on `mesh_points` uniform nodes.
pub fn solve_bvp_nondegenerate(
    params: &ModelParams,
    t_final: f64,
    mesh_points: usize,
    initial_guess: &InitialGuess,
) -> Result<BvpSolution> {
    solve_bvp_nondegenerate_with(params, t_final, mesh_points, initial_guess, &BvpOptions::default())
}

pub fn solve_bvp_nondegenerate_with(
    params: &ModelParams,
    t_final: f64,
    mesh_points: usize,
    initial_guess: &InitialGuess,
    opts: &BvpOptions,
) -> Result<BvpSolution> {
    check_common(params, t_final, mesh_points)?;
    if !(params.sigma0 > 0.0) {
        return Err(Error::invalid("non-degenerate problem needs sigma0 > 0"));
    }
    let mesh = PathGrid::uniform(t_final, mesh_points - 1)?;
    let cols = match initial_guess {
        InitialGuess::Auto => {
            let a = solve_bvp_nondegenerate_with(params, t_final, mesh_points, &InitialGuess::ConstantMinusOne, opts);
            let b = solve_bvp_nondegenerate_with(params, t_final, mesh_points, &InitialGuess::StraightLine, opts);
            return pick_best(a, b);
        }
        InitialGuess::ConstantMinusOne => preset(&mesh, false, 2),
        InitialGuess::StraightLine => preset(&mesh, true, 2),
        InitialGuess::Path(path) => sample(
            path,
            &mesh,
            &["x0", "xbar", "dx0", "dxbar"],
            &[None, None, Some(0), Some(1)],
        )?,
    };
    let sys = NonDegenerate::new(params);
    let res = collocation::solve(&sys, mesh.t(), interleave(&cols), &opts.newton)?;
    let (x0, xb, v0, vb) = (column(&res.y, 4, 0), column(&res.y, 4, 1), column(&res.y, 4, 2), column(&res.y, 4, 3));
    let rate_value = rate_nondegenerate_jets(mesh.dt(), &x0, &v0, &xb, &vb, params);
    let grid = mesh
        .with_series("x0", x0)?
        .with_series("xbar", xb)?
        .with_series("dx0", v0)?
        .with_series("dxbar", vb)?;
    finish(grid, rate_value, &res)
}
