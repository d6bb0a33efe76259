//! First-order optimality certificate for computed most probable paths.
//!
//! The discrete rate functional is perturbed along smooth admissible
//! directions `phi` that vanish with their first derivative at both ends, and
//! `dI/d eps` is taken by central differences. At a minimizer the derivative
//! vanishes up to discretization error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rate::{rate_degenerate_jets, rate_nondegenerate_jets};
use super::BvpSolution;
use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
const MODES: usize = 4;

/// `phi(t) = sin^4(pi t / T) sum_k c_k sin(k pi t / T)` with its first two
/// derivatives; `phi` and `phi'` vanish at `0` and `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub coefficients: Vec<f64>,
}

impl Perturbation {
    pub fn random(rng: &mut impl Rng) -> Self {
        Perturbation {
            coefficients: (0..MODES).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    /// `(phi, phi', phi'')` at `t` on `[0, t_final]`.
    pub fn jets(&self, t: f64, t_final: f64) -> (f64, f64, f64) {
        let w = std::f64::consts::PI / t_final;
        let (s, c) = (w * t).sin_cos();
        let env = s.powi(4);
        let denv = 4.0 * w * s.powi(3) * c;
        let d2env = 4.0 * w * w * s * s * (3.0 * c * c - s * s);
        let (mut g, mut dg, mut d2g) = (0.0, 0.0, 0.0);
        for (k, ck) in self.coefficients.iter().enumerate() {
            let kw = (k + 1) as f64 * w;
            let (sk, ckk) = (kw * t).sin_cos();
            g += ck * sk;
            dg += ck * kw * ckk;
            d2g -= ck * kw * kw * sk;
        }
        (env * g, denv * g + env * dg, d2env * g + 2.0 * denv * dg + env * d2g)
    }

    fn sample(&self, t: &[f64], t_final: f64) -> [Vec<f64>; 3] {
        let mut out = [Vec::new(), Vec::new(), Vec::new()];
        for &ti in t {
            let (p, dp, d2p) = self.jets(ti, t_final);
            out[0].push(p);
            out[1].push(dp);
            out[2].push(d2p);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    /// `|dI/d eps| / (max|phi| max(1, I))` per perturbation.
    pub relative_derivatives: Vec<f64>,
    pub max_relative_derivative: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn shifted(base: &[f64], dir: &[f64], eps: f64) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + eps * d).collect()
}

/// Central-difference derivative of the discrete rate functional at `sol`
/// along `phi`. In the non-degenerate case `phi` moves `x0` and `psi` moves
/// `xbar`; in the degenerate case only `phi` is used.
pub fn directional_derivative(
    sol: &BvpSolution,
    params: &ModelParams,
    phi: &Perturbation,
    psi: &Perturbation,
    eps: f64,
) -> Result<f64> {
    let g = &sol.grid;
    let (dt, t_final) = (g.dt(), g.t_final());
    let p = phi.sample(g.t(), t_final);
    let rate = |e: f64| -> Result<f64> {
        if params.sigma0 == 0.0 {
            let x = shifted(g.series("x0")?, &p[0], e);
            let v = shifted(g.series("dx0")?, &p[1], e);
            let a = shifted(g.series("d2x0")?, &p[2], e);
            Ok(rate_degenerate_jets(dt, &x, &v, &a, params))
        } else {
            let q = psi.sample(g.t(), t_final);
            let x0 = shifted(g.series("x0")?, &p[0], e);
            let v0 = shifted(g.series("dx0")?, &p[1], e);
            let xb = shifted(g.series("xbar")?, &q[0], e);
            let vb = shifted(g.series("dxbar")?, &q[1], e);
            Ok(rate_nondegenerate_jets(dt, &x0, &v0, &xb, &vb, params))
        }
    };
    Ok((rate(eps)? - rate(-eps)?) / (2.0 * eps))
}

/// Tests `n_directions` random admissible perturbations drawn from `seed`.
pub fn check_optimality(
    sol: &BvpSolution,
    params: &ModelParams,
    n_directions: usize,
    seed: u64,
    eps: f64,
    tolerance: f64,
) -> Result<OptimalityReport> {
    if !sol.converged {
        return Err(Error::invalid("optimality check needs a converged solution"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = sol.grid.t();
    let scale = sol.rate_value.max(1.0);
    let mut rel = Vec::with_capacity(n_directions);
    for _ in 0..n_directions {
        let phi = Perturbation::random(&mut rng);
        let psi = Perturbation::random(&mut rng);
        let norm = t
            .iter()
            .map(|&ti| {
                let a = phi.jets(ti, sol.grid.t_final()).0.abs();
                if params.sigma0 == 0.0 {
                    a
                } else {
                    a.max(psi.jets(ti, sol.grid.t_final()).0.abs())
                }
            })
            .fold(0.0, f64::max);
        let d = directional_derivative(sol, params, &phi, &psi, eps)?;
        rel.push(d.abs() / (norm * scale));
    }
    let max_relative_derivative = rel.iter().copied().fold(0.0, f64::max);
    Ok(OptimalityReport {
        relative_derivatives: rel,
        max_relative_derivative,
        tolerance,
        passed: max_relative_derivative < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldp::{solve_bvp_degenerate, solve_bvp_nondegenerate, InitialGuess};

    #[test]
    fn perturbation_jets_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Perturbation::random(&mut rng);
        let (t_final, h) = (7.0, 1e-5);
        for t in [0.3, 2.0, 5.9] {
            let (_, d1, d2) = p.jets(t, t_final);
            let fd1 = (p.jets(t + h, t_final).0 - p.jets(t - h, t_final).0) / (2.0 * h);
            let fd2 = (p.jets(t + h, t_final).1 - p.jets(t - h, t_final).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8 && (d2 - fd2).abs() < 1e-7);
        }
        for t in [0.0, t_final] {
            let (a, b, _) = p.jets(t, t_final);
            assert!(a.abs() < 1e-14 && b.abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_minimizer_is_stationary() {
        let p = ModelParams::new(1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 100).unwrap();
        let s = solve_bvp_degenerate(&p, 10.0, 2000, &InitialGuess::Auto).unwrap();
        let r = check_optimality(&s, &p, 20, 11, DEFAULT_EPSILON, DEFAULT_TOLERANCE).unwrap();
        assert!(r.passed, "{:?}", r.max_relative_derivative);
    }

    #[test]
    fn nondegenerate_minimizer_is_stationary() {
        let p = ModelParams::new(1.0, 0.0, 0.5, 1.0, 1.0, 1.0, 100).unwrap();
        let s = solve_bvp_nondegenerate(&p, 10.0, 2000, &InitialGuess::Auto).unwrap();
        let r = check_optimality(&s, &p, 20, 12, DEFAULT_EPSILON, DEFAULT_TOLERANCE).unwrap();
        assert!(r.passed, "{:?}", r.max_relative_derivative);
    }

    #[test]
    fn non_minimizer_is_detected() {
        let p = ModelParams::new(0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 100).unwrap();
        let mut s = solve_bvp_nondegenerate(&p, 10.0, 500, &InitialGuess::Auto).unwrap();
        let t_final = s.grid.t_final();
        let bump: Vec<f64> = s.grid.t().iter().map(|t| (std::f64::consts::PI * t / t_final).sin().powi(4)).collect();
        let x0: Vec<f64> = s.grid.series("x0").unwrap().iter().zip(&bump).map(|(x, b)| x + 0.3 * b).collect();
        let v0 = crate::ldp::rate::derivative(&x0, s.grid.dt());
        s.grid.insert("x0", x0).unwrap();
        s.grid.insert("dx0", v0).unwrap();
        let r = check_optimality(&s, &p, 5, 1, DEFAULT_EPSILON, DEFAULT_TOLERANCE).unwrap();
        assert!(!r.passed);
    }
}
