//! Gaussian fluctuations `z = sqrt(N) (x - y_e)` of the `h = 0` system around
//! a mean-field equilibrium.
//!
//! The fluctuations solve `dz = A z dt + diag(sigma0, sigma) dW` with
//!
//! ```text
//! A = [[-h0 V''(y0e) - theta0, theta0],
//!      [ theta,               -theta ]]
//! ```
//!
//! Stationary second moments are computed twice: in closed form through the
//! eigen-decomposition `A = Q diag(l1, l2) Q^-1`, and by solving the Lyapunov
//! equation `A S + S A^T + D = 0` directly. The closed form has a removable
//! singularity at `l1 = l2`; the Lyapunov route takes over there.

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::integrate;
use crate::potential::V;

/// Discriminants at or below this value count as a repeated eigenvalue.
pub const DEGENERATE_DISCRIMINANT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl DriftMatrix {
    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a11, self.a12, self.a21, self.a22)
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// `tr^2 - 4 det`, written to avoid cancellation.
    pub fn discriminant(&self) -> f64 {
        (self.a11 - self.a22).powi(2) + 4.0 * self.a12 * self.a21
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenStructure {
    pub lambda1: f64,
    pub lambda2: f64,
    pub q: Matrix2<f64>,
    pub q_inv: Matrix2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceReport {
    pub var_z0: f64,
    pub var_zbar: f64,
    pub cov: f64,
    pub limit_var_z0: f64,
    pub limit_var_zbar: f64,
    pub limit_cov: f64,
}

pub fn build_drift(params: &ModelParams, y0e: f64) -> DriftMatrix {
    DriftMatrix {
        a11: -params.h0 * V.d2(y0e) - params.theta0,
        a12: params.theta0,
        a21: params.theta,
        a22: -params.theta,
    }
}

fn noise(params: &ModelParams) -> Matrix2<f64> {
    Matrix2::new(params.sigma0.powi(2), 0.0, 0.0, params.sigma.powi(2))
}

/// Real eigenvalues `l1 >= l2` with eigenvector matrix `Q` and its inverse.
pub fn eigen_decompose(m: &DriftMatrix) -> Result<EigenStructure> {
    let disc = m.discriminant();
    if !(disc > DEGENERATE_DISCRIMINANT) {
        return Err(Error::DegenerateSpectrum(disc));
    }
    let s = disc.sqrt();
    let tr = m.trace();
    let det = m.det();
    // the root of larger magnitude is formed without cancellation, the other
    // from the product of the roots
    let (lambda1, lambda2) = if tr <= 0.0 {
        let l2 = 0.5 * (tr - s);
        (det / l2, l2)
    } else {
        let l1 = 0.5 * (tr + s);
        (l1, det / l1)
    };
    let (q, q_inv) = if m.a21 > 0.0 && m.a22 == -m.a21 {
        let th = m.a21;
        let c = th / (lambda1 - lambda2);
        let q = Matrix2::new(
            c * (1.0 + lambda1 / th),
            c * (1.0 + lambda2 / th),
            c,
            c,
        );
        let q_inv = Matrix2::new(1.0, -(1.0 + lambda2 / th), -1.0, 1.0 + lambda1 / th);
        (q, q_inv)
    } else {
        let vec_for = |l: f64| {
            let u = (m.a12, l - m.a11);
            let w = (l - m.a22, m.a21);
            if u.0.hypot(u.1) >= w.0.hypot(w.1) {
                u
            } else {
                w
            }
        };
        let mut v1 = vec_for(lambda1);
        let mut v2 = vec_for(lambda2);
        // diagonal matrix: both candidate vectors vanish
        if v1.0.hypot(v1.1) == 0.0 || v2.0.hypot(v2.1) == 0.0 {
            if m.a11 >= m.a22 {
                v1 = (1.0, 0.0);
                v2 = (0.0, 1.0);
            } else {
                v1 = (0.0, 1.0);
                v2 = (1.0, 0.0);
            }
        }
        let q = Matrix2::new(v1.0, v2.0, v1.1, v2.1);
        let q_inv = q
            .try_inverse()
            .ok_or(Error::DegenerateSpectrum(disc))?;
        (q, q_inv)
    };
    Ok(EigenStructure {
        lambda1,
        lambda2,
        q,
        q_inv,
    })
}

/// Solves `A S + S A^T + D = 0` for symmetric `S` as a 3x3 linear system in
/// `(s11, s12, s22)`.
pub fn lyapunov_solve(a: &Matrix2<f64>, d: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let (a11, a12, a21, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let k = Matrix3::new(
        2.0 * a11,
        2.0 * a12,
        0.0,
        a21,
        a11 + a22,
        a12,
        0.0,
        2.0 * a21,
        2.0 * a22,
    );
    let rhs = Vector3::new(-d[(0, 0)], -0.5 * (d[(0, 1)] + d[(1, 0)]), -d[(1, 1)]);
    let s = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::invalid("Lyapunov operator is singular (eigenvalues sum to zero)"))?;
    Ok(Matrix2::new(s[0], s[1], s[1], s[2]))
}

fn require_linear(params: &ModelParams) -> Result<()> {
    params.validate()?;
    params.require_h_zero("the linear fluctuation analysis")
}

/// `(limit_var_z0, limit_var_zbar, limit_cov)` for large `theta` at fixed
/// `alpha = sigma^2 / theta`. With `h0 V''(y0e) = 0` the central variance is
/// `0` when `sigma0 = 0` and infinite otherwise.
pub fn fluctuation_limits(params: &ModelParams, y0e: f64) -> (f64, f64, f64) {
    let stiffness = 2.0 * params.h0 * V.d2(y0e);
    let s0 = params.sigma0.powi(2);
    let v0 = if s0 == 0.0 {
        0.0
    } else if stiffness == 0.0 {
        f64::INFINITY
    } else {
        s0 / stiffness
    };
    let vbar = v0 + params.sigma.powi(2) / (2.0 * params.theta);
    (v0, vbar, v0)
}

/// Closed-form stationary covariance `Q diag(-M_ij / (l_i + l_j)) Q^T` with
/// `M = Q^-1 D Q^-T`.
fn stationary_from_eigen(e: &EigenStructure, d: &Matrix2<f64>) -> Matrix2<f64> {
    let m = e.q_inv * d * e.q_inv.transpose();
    let l = [e.lambda1, e.lambda2];
    let mid = Matrix2::from_fn(|i, j| -m[(i, j)] / (l[i] + l[j]));
    e.q * mid * e.q.transpose()
}

/// Stationary covariance of `(z0, zbar)` with its large-`theta` limits.
pub fn stationary_covariance(params: &ModelParams, y0e: f64) -> Result<CovarianceReport> {
    require_linear(params)?;
    let drift = build_drift(params, y0e);
    let a = drift.to_matrix();
    let d = noise(params);
    let s = match eigen_decompose(&drift) {
        Ok(e) => {
            if e.lambda1 >= 0.0 {
                return Err(Error::Unstable(e.lambda1));
            }
            let s = stationary_from_eigen(&e, &d);
            if cfg!(debug_assertions) {
                let l = lyapunov_solve(&a, &d)?;
                let scale = l.abs().max().max(f64::MIN_POSITIVE);
                debug_assert!(
                    (s - l).abs().max() <= 1e-6 * scale,
                    "eigen and Lyapunov covariances disagree: {s} vs {l}"
                );
            }
            s
        }
        Err(Error::DegenerateSpectrum(_)) => {
            // repeated eigenvalue 0.5 tr; stable iff tr < 0
            let lam = 0.5 * drift.trace();
            if lam >= 0.0 {
                return Err(Error::Unstable(lam));
            }
            lyapunov_solve(&a, &d)?
        }
        Err(e) => return Err(e),
    };
    let (limit_var_z0, limit_var_zbar, limit_cov) = fluctuation_limits(params, y0e);
    Ok(CovarianceReport {
        var_z0: s[(0, 0)],
        var_zbar: s[(1, 1)],
        cov: s[(0, 1)],
        limit_var_z0,
        limit_var_zbar,
        limit_cov,
    })
}

/// Stationary covariance by the Lyapunov route only.
pub fn stationary_covariance_lyapunov(params: &ModelParams, y0e: f64) -> Result<Matrix2<f64>> {
    require_linear(params)?;
    lyapunov_solve(&build_drift(params, y0e).to_matrix(), &noise(params))
}

/// `(e^{s t} - 1) / s`, equal to `t` at `s = 0`.
fn phi(s: f64, t: f64) -> f64 {
    if s == 0.0 {
        t
    } else {
        (s * t).exp_m1() / s
    }
}

/// `int_0^t e^{(t-s)A} D e^{(t-s)A^T} ds`, the covariance of `z(t)` started at 0.
pub fn covariance_at_time(params: &ModelParams, y0e: f64, t: f64) -> Result<Matrix2<f64>> {
    require_linear(params)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be finite and >= 0, got {t}")));
    }
    let drift = build_drift(params, y0e);
    let d = noise(params);
    match eigen_decompose(&drift) {
        Ok(e) => {
            let m = e.q_inv * d * e.q_inv.transpose();
            let l = [e.lambda1, e.lambda2];
            let mid = Matrix2::from_fn(|i, j| m[(i, j)] * phi(l[i] + l[j], t));
            Ok(e.q * mid * e.q.transpose())
        }
        Err(Error::DegenerateSpectrum(_)) => Ok(covariance_by_quadrature(&drift.to_matrix(), &d, t)),
        Err(e) => Err(e),
    }
}

/// Entry-wise adaptive quadrature of the covariance integrand.
pub fn covariance_by_quadrature(a: &Matrix2<f64>, d: &Matrix2<f64>, t: f64) -> Matrix2<f64> {
    let integrand = |s: f64, i: usize, j: usize| {
        let e = (a * s).exp();
        (e * d * e.transpose())[(i, j)]
    };
    let mut out = Matrix2::zeros();
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let scale = d.abs().max().max(f64::MIN_POSITIVE) * t.max(1e-300);
        let v = integrate(|s| integrand(s, i, j), 0.0, t, 1e-15 * scale, 1e-13).value;
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    out
}

/// Covariance of `(x0(T), xbar(T))` for `h0 = h = 0` started at `(-1, -1)`,
/// including the `1/N` factor. Returns `(exact, large_T_rank_one)`.
pub fn terminal_covariance_h0_zero(
    params: &ModelParams,
    t_final: f64,
) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    params.validate()?;
    if params.h0 != 0.0 || params.h != 0.0 {
        return Err(Error::invalid(format!(
            "terminal covariance formula needs h0 = h = 0 (h0 = {}, h = {})",
            params.h0, params.h
        )));
    }
    if !(params.theta > 0.0) {
        return Err(Error::invalid("terminal covariance formula needs theta > 0"));
    }
    if !(t_final >= 0.0) {
        return Err(Error::invalid(format!("horizon must be >= 0, got {t_final}")));
    }
    let (th0, th) = (params.theta0, params.theta);
    let (s0, s) = (params.sigma0.powi(2), params.sigma.powi(2));
    let tb = th0 + th;
    let e = (-tb * t_final).exp();
    let n = params.n_agents as f64;
    let sig = Matrix2::new(
        t_final * (s0 + th0 * th0 * s / (th * th)),
        (-s0 + th0 * s / th) * (-(-tb * t_final).exp_m1()) / tb,
        (-s0 + th0 * s / th) * (-(-tb * t_final).exp_m1()) / tb,
        (s0 + s) * (1.0 - e * e) / (2.0 * tb),
    );
    let q0 = Matrix2::new(th, -th0, th, th) / tb;
    let exact = q0 * sig * q0.transpose() / n;
    let c = t_final / n * (th * th * s0 + th0 * th0 * s) / (tb * tb);
    let approx = Matrix2::new(c, c, c, c);
    Ok((exact, approx))
}
