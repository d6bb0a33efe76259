//! Hermite-Simpson collocation with damped Newton for two-point boundary
//! value problems `y' = f(t, y)` with Dirichlet conditions on a subset of the
//! components at each end.
//!
//! On each mesh interval the residual is
//!
//! ```text
//! y_m = (y_i + y_{i+1}) / 2 + h (f_i - f_{i+1}) / 8
//! r_i = y_{i+1} - y_i - h (f_i + 4 f(y_m) + f_{i+1}) / 6
//! ```
//!
//! which is fourth-order accurate. Equations are ordered as
//! `[left conditions, interval residuals, right conditions]`, giving a banded
//! Jacobian.

use crate::error::{Error, Result};
use crate::numerics::BandedLu;

/// Newton corrections below this (relative to `max(1, max |y|)`) count as
/// converged.
pub const STEP_TOLERANCE: f64 = 1e-10;

pub trait BvpSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]);
    /// Row-major `dim x dim` Jacobian of `rhs` with respect to `y`.
    fn jacobian(&self, t: f64, y: &[f64], out: &mut [f64]);
    /// `(component, value)` pairs fixed at `t = 0`.
    fn left_bc(&self) -> Vec<(usize, f64)>;
    /// `(component, value)` pairs fixed at `t = T`.
    fn right_bc(&self) -> Vec<(usize, f64)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Bound on `max_i |r_i| / h`, relative to `max(1, max |y'|)`.
    pub tolerance: f64,
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 50,
            tolerance: 1e-10,
            min_step: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationResult {
    /// Node states, `y[i * dim + k]`.
    pub y: Vec<f64>,
    pub residual: f64,
    pub boundary_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Layout {
    n: usize,
    m: usize,
    left: Vec<(usize, f64)>,
    right: Vec<(usize, f64)>,
}

impl Layout {
    fn rows(&self) -> usize {
        self.n * (self.m + 1)
    }
    fn interval_row(&self, i: usize, k: usize) -> usize {
        self.left.len() + i * self.n + k
    }
    fn right_row(&self, k: usize) -> usize {
        self.left.len() + self.m * self.n + k
    }
}

/// Scaled residual vector: boundary rows as is, interval rows divided by `h`.
fn residual<S: BvpSystem>(sys: &S, lay: &Layout, t: &[f64], y: &[f64], out: &mut [f64]) -> f64 {
    let n = lay.n;
    let mut fi = vec![0.0; n];
    let mut fj = vec![0.0; n];
    let mut fm = vec![0.0; n];
    let mut ym = vec![0.0; n];
    let mut fmax: f64 = 1.0;
    for (r, &(k, v)) in lay.left.iter().enumerate() {
        out[r] = y[k] - v;
    }
    sys.rhs(t[0], &y[0..n], &mut fi);
    for i in 0..lay.m {
        let h = t[i + 1] - t[i];
        let (yi, yj) = (&y[i * n..(i + 1) * n], &y[(i + 1) * n..(i + 2) * n]);
        sys.rhs(t[i + 1], yj, &mut fj);
        for k in 0..n {
            ym[k] = 0.5 * (yi[k] + yj[k]) + h / 8.0 * (fi[k] - fj[k]);
        }
        sys.rhs(t[i] + 0.5 * h, &ym, &mut fm);
        for k in 0..n {
            let r = yj[k] - yi[k] - h / 6.0 * (fi[k] + 4.0 * fm[k] + fj[k]);
            out[lay.interval_row(i, k)] = r / h;
            fmax = fmax.max(fi[k].abs());
        }
        std::mem::swap(&mut fi, &mut fj);
    }
    for k in 0..n {
        fmax = fmax.max(fi[k].abs());
    }
    for (r, &(k, v)) in lay.right.iter().enumerate() {
        out[lay.right_row(r)] = y[lay.m * n + k] - v;
    }
    fmax
}

fn jacobian<S: BvpSystem>(sys: &S, lay: &Layout, t: &[f64], y: &[f64]) -> Result<BandedLu> {
    let n = lay.n;
    let nl = lay.left.len();
    let kl = nl + n - 1;
    let ku = 2 * n - 1 - nl;
    let mut jac = BandedLu::zeros(lay.rows(), kl, ku);
    for (r, &(k, _)) in lay.left.iter().enumerate() {
        jac.add(r, k, 1.0)?;
    }
    let mut fi = vec![0.0; n];
    let mut fj = vec![0.0; n];
    let mut ym = vec![0.0; n];
    let mut ji = vec![0.0; n * n];
    let mut jj = vec![0.0; n * n];
    let mut jm = vec![0.0; n * n];
    for i in 0..lay.m {
        let h = t[i + 1] - t[i];
        let (yi, yj) = (&y[i * n..(i + 1) * n], &y[(i + 1) * n..(i + 2) * n]);
        sys.rhs(t[i], yi, &mut fi);
        sys.rhs(t[i + 1], yj, &mut fj);
        sys.jacobian(t[i], yi, &mut ji);
        sys.jacobian(t[i + 1], yj, &mut jj);
        for k in 0..n {
            ym[k] = 0.5 * (yi[k] + yj[k]) + h / 8.0 * (fi[k] - fj[k]);
        }
        sys.jacobian(t[i] + 0.5 * h, &ym, &mut jm);
        // d y_m / d y_i = I/2 + h/8 J_i,  d y_m / d y_{i+1} = I/2 - h/8 J_{i+1}
        for r in 0..n {
            let row = lay.interval_row(i, r);
            for c in 0..n {
                let delta = if r == c { 1.0 } else { 0.0 };
                let mut dmi = 0.0;
                let mut dmj = 0.0;
                for q in 0..n {
                    let dq = if q == c { 0.5 } else { 0.0 };
                    dmi += jm[r * n + q] * (dq + h / 8.0 * ji[q * n + c]);
                    dmj += jm[r * n + q] * (dq - h / 8.0 * jj[q * n + c]);
                }
                let di = -delta - h / 6.0 * (ji[r * n + c] + 4.0 * dmi);
                let dj = delta - h / 6.0 * (jj[r * n + c] + 4.0 * dmj);
                jac.add(row, i * n + c, di / h)?;
                jac.add(row, (i + 1) * n + c, dj / h)?;
            }
        }
    }
    for (r, &(k, _)) in lay.right.iter().enumerate() {
        jac.add(lay.right_row(r), lay.m * n + k, 1.0)?;
    }
    Ok(jac)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn split_norms(lay: &Layout, r: &[f64]) -> (f64, f64) {
    let nl = lay.left.len();
    let body = lay.m * lay.n;
    let ode = r[nl..nl + body].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bc = r[..nl]
        .iter()
        .chain(&r[nl + body..])
        .fold(0.0f64, |m, v| m.max(v.abs()));
    (ode, bc)
}

/// Solves the collocation equations on the mesh `t` starting from `guess`
/// (node states, `guess[i * dim + k]`). Returns the final iterate whether or
/// not it converged.
pub fn solve<S: BvpSystem>(
    sys: &S,
    t: &[f64],
    guess: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<CollocationResult> {
    let n = sys.dim();
    let left = sys.left_bc();
    let right = sys.right_bc();
    if left.len() + right.len() != n {
        return Err(Error::invalid(format!(
            "{} boundary conditions for a system of dimension {n}",
            left.len() + right.len()
        )));
    }
    if t.len() < 2 || guess.len() != n * t.len() {
        return Err(Error::Shape(format!(
            "guess has {} entries, mesh of {} points needs {}",
            guess.len(),
            t.len(),
            n * t.len()
        )));
    }
    let lay = Layout {
        n,
        m: t.len() - 1,
        left,
        right,
    };
    let mut y = guess;
    let mut r = vec![0.0; lay.rows()];
    let mut fmax = residual(sys, &lay, t, &y, &mut r);
    let mut rnorm = norm2(&r);
    let mut trial = vec![0.0; y.len()];
    let mut r_trial = vec![0.0; lay.rows()];
    let mut iterations = 0;
    // estimate of the remaining error: the simplified Newton correction at
    // the current iterate
    let mut correction = f64::INFINITY;
    loop {
        let (ode, bc) = split_norms(&lay, &r);
        let ymax = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        // the correction test covers stiff coefficients whose residual
        // bottoms out at roundoff above the relative tolerance
        let converged = ode.is_finite()
            && bc <= 1e-10
            && (ode <= opts.tolerance * fmax || correction <= STEP_TOLERANCE * ymax);
        if converged || iterations >= opts.max_iterations || !rnorm.is_finite() {
            return Ok(CollocationResult {
                y,
                residual: ode,
                boundary_residual: bc,
                iterations,
                converged,
            });
        }
        iterations += 1;
        let mut jac = jacobian(sys, &lay, t, &y)?;
        if jac.factor().is_err() {
            return Ok(CollocationResult {
                y,
                residual: ode,
                boundary_residual: bc,
                iterations,
                converged: false,
            });
        }
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        jac.solve(&mut step)?;
        let step_norm = norm2(&step);
        let mut alpha = 1.0;
        loop {
            for ((tr, yv), s) in trial.iter_mut().zip(&y).zip(&step) {
                *tr = yv + alpha * s;
            }
            let fm = residual(sys, &lay, t, &trial, &mut r_trial);
            // natural monotonicity test: the simplified Newton correction at
            // the trial point must shrink relative to the full correction
            let mut simplified: Vec<f64> = r_trial.iter().map(|v| -v).collect();
            jac.solve(&mut simplified)?;
            let ratio = norm2(&simplified) / step_norm;
            let ok = ratio.is_finite() && ratio <= 1.0 - 0.25 * alpha;
            if ok || alpha <= opts.min_step {
                if r_trial.iter().all(|v| v.is_finite()) {
                    std::mem::swap(&mut y, &mut trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    rnorm = norm2(&r);
                    fmax = fm;
                    correction = simplified.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                }
                break;
            }
            alpha *= 0.5;
        }
    }
}
