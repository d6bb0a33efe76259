//! Mean-field limit: the `(y0, ybar)` ODE pair for `h = 0`, the stationary
//! density of the local agents, the consistency equation fixing the central
//! agent's equilibrium, and its first-order shift in `h`.

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::model::ModelParams;
use crate::numerics::{brent, integrate, rk4_step};
use crate::potential::V;

/// Limit state of the central agent and the local mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldState {
    pub y0: f64,
    pub ybar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumReport {
    pub y0e: f64,
    pub ybar_e: f64,
    /// First-order coefficient `y0e1` of the shift in `h`; NaN when `h0 = 0`.
    pub order1_shift: f64,
    pub partition_norm: f64,
}

const QUAD_REL: f64 = 1e-13;
const WINDOW_SDS: f64 = 10.0;

/// RK4 integration of `y0' = -h0 V'(y0) - theta0 (y0 - ybar)`,
/// `ybar' = -theta (ybar - y0)`. Series `y0`, `ybar`.
pub fn integrate_meanfield(
    params: &ModelParams,
    y0_init: f64,
    ybar_init: f64,
    t_final: f64,
    dt: f64,
) -> Result<PathGrid> {
    params.validate()?;
    params.require_h_zero("the closed mean-field ODE pair")?;
    if !(t_final > 0.0 && dt > 0.0 && dt <= t_final) {
        return Err(Error::invalid(format!(
            "need 0 < dt <= t_final (dt = {dt}, t_final = {t_final})"
        )));
    }
    let steps = (t_final / dt).round() as usize;
    if ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final {
        return Err(Error::invalid(format!("t_final / dt = {} is not an integer", t_final / dt)));
    }
    let (h0, th0, th) = (params.h0, params.theta0, params.theta);
    let f = |y: &[f64; 2]| [-h0 * V.d1(y[0]) - th0 * (y[0] - y[1]), -th * (y[1] - y[0])];
    let mut y = [y0_init, ybar_init];
    let mut y0s = Vec::with_capacity(steps + 1);
    let mut ybars = Vec::with_capacity(steps + 1);
    y0s.push(y[0]);
    ybars.push(y[1]);
    let h = t_final / steps as f64;
    for step in 1..=steps {
        y = rk4_step(&f, &y, h);
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::Divergence {
                step,
                t: step as f64 * h,
            });
        }
        y0s.push(y[0]);
        ybars.push(y[1]);
    }
    PathGrid::uniform(t_final, steps)?
        .with_series("y0", y0s)?
        .with_series("ybar", ybars)
}

fn require_density(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.theta <= 0.0 {
        return Err(Error::invalid("the stationary density needs theta > 0"));
    }
    Ok(())
}

/// Exponent of the unnormalized stationary density.
fn log_weight(params: &ModelParams, y0e: f64, x: f64) -> f64 {
    -(2.0 * params.h * V.value(x) + params.theta * (x - y0e).powi(2)) / (params.sigma * params.sigma)
}

fn window(params: &ModelParams, y0e: f64) -> (f64, f64) {
    let sd = params.sigma / (2.0 * params.theta).sqrt();
    (y0e - WINDOW_SDS * sd, y0e + WINDOW_SDS * sd)
}

/// `Z(y0e)`, the normalization of the stationary density.
pub fn partition_norm(params: &ModelParams, y0e: f64) -> Result<f64> {
    require_density(params)?;
    let (a, b) = window(params, y0e);
    Ok(integrate(|x| log_weight(params, y0e, x).exp(), a, b, 0.0, QUAD_REL).value)
}

/// `p^e(x; y0e) = exp(-[2hV(x) + theta (x - y0e)^2] / sigma^2) / Z`.
pub fn stationary_density(params: &ModelParams, y0e: f64, x: f64) -> Result<f64> {
    let z = partition_norm(params, y0e)?;
    Ok(log_weight(params, y0e, x).exp() / z)
}

/// Mean of the stationary density, computed as `y0e + E[x - y0e]`.
pub fn stationary_mean(params: &ModelParams, y0e: f64) -> Result<f64> {
    require_density(params)?;
    let (a, b) = window(params, y0e);
    let z = integrate(|x| log_weight(params, y0e, x).exp(), a, b, 0.0, QUAD_REL).value;
    let scale = params.sigma / params.theta.sqrt();
    let m = integrate(
        |x| (x - y0e) * log_weight(params, y0e, x).exp(),
        a,
        b,
        1e-15 * z * scale,
        QUAD_REL,
    )
    .value;
    Ok(y0e + m / z)
}

/// Residual `E[x] - y - (h0/theta0) V0'(y)` of the consistency equation.
pub fn consistency_residual(params: &ModelParams, y: f64) -> Result<f64> {
    Ok(stationary_mean(params, y)? - y - params.h0 / params.theta0 * V.d1(y))
}

/// Equilibrium `y0e` of the central agent, bracketed on `(lo, hi)`.
pub fn solve_consistency(params: &ModelParams, bracket: (f64, f64)) -> Result<f64> {
    require_density(params)?;
    if !(params.h0 > 0.0 && params.theta0 > 0.0) {
        return Err(Error::invalid("the consistency equation needs h0 > 0 and theta0 > 0"));
    }
    let (lo, hi) = bracket;
    let mut failed = None;
    let root = brent(
        |y| match consistency_residual(params, y) {
            Ok(r) => r,
            Err(e) => {
                failed.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-12,
    );
    if let Some(e) = failed {
        return Err(e);
    }
    root
}

/// First-order coefficient `y0e1` in `y0e = y0e0 + h y0e1 + o(h)`, by
/// quadrature of `V'(y0e0 + x)` against the `h = 0` Gaussian.
pub fn equilibrium_shift(params: &ModelParams, y0e0: f64) -> Result<f64> {
    params.validate()?;
    if !(params.h0 > 0.0 && params.theta > 0.0) {
        return Err(Error::invalid("the equilibrium shift needs h0 > 0 and theta > 0"));
    }
    if y0e0 != -1.0 && y0e0 != 1.0 {
        return Err(Error::invalid(format!("y0e0 must be -1 or +1, got {y0e0}")));
    }
    let c = params.theta / (params.sigma * params.sigma);
    let half = WINDOW_SDS * params.sigma / (2.0 * params.theta).sqrt();
    let w = integrate(|x| (-c * x * x).exp(), -half, half, 0.0, QUAD_REL).value;
    let mean_dv = integrate(
        |x| (-c * x * x).exp() * V.d1(y0e0 + x),
        -half,
        half,
        1e-16 * w,
        QUAD_REL,
    )
    .value
        / w;
    Ok(-params.theta0 / (params.h0 * params.theta * V.d2(y0e0)) * mean_dv)
}

/// The closed form `-/+ 3 theta0 sigma^2 / (4 h0 theta^2)` at `y0e0 = +/-1`.
pub fn equilibrium_shift_closed_form(params: &ModelParams, y0e0: f64) -> f64 {
    -y0e0.signum() * 3.0 * params.theta0 * params.sigma.powi(2)
        / (4.0 * params.h0 * params.theta.powi(2))
}

/// Solves the consistency equation on `bracket` and fills in the associated
/// mean, partition function and first-order shift.
pub fn equilibrium(params: &ModelParams, bracket: (f64, f64)) -> Result<EquilibriumReport> {
    let y0e = solve_consistency(params, bracket)?;
    let y0e0 = if y0e < 0.0 { -1.0 } else { 1.0 };
    Ok(EquilibriumReport {
        y0e,
        ybar_e: y0e + params.h0 / params.theta0 * V.d1(y0e),
        order1_shift: equilibrium_shift(params, y0e0)?,
        partition_norm: partition_norm(params, y0e)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn baseline(h: f64) -> ModelParams {
        ModelParams::new(0.5, h, 0.1, 1.0, 0.1, 10.0, 100).unwrap()
    }

    #[test]
    fn equilibrium_is_conserved() {
        for s in [-1.0, 1.0] {
            let g = integrate_meanfield(&baseline(0.0), s, s, 100.0, 0.01).unwrap();
            let drift = g
                .series("y0")
                .unwrap()
                .iter()
                .chain(g.series("ybar").unwrap())
                .map(|v| (v - s).abs())
                .fold(0.0, f64::max);
            assert!(drift < 1e-12);
        }
    }

    #[test]
    fn basins_of_attraction() {
        let p = baseline(0.0);
        for (start, target) in [(-0.5, -1.0), (0.9, 1.0)] {
            let coarse = integrate_meanfield(&p, start, start, 40.0, 0.01).unwrap();
            let fine = integrate_meanfield(&p, start, start, 40.0, 1e-4).unwrap();
            let c = coarse.series("y0").unwrap();
            let f = fine.series("y0").unwrap();
            for i in 0..c.len() {
                assert!((c[i] - f[100 * i]).abs() < 1e-8);
            }
            assert!((c[c.len() - 1] - target).abs() < 1e-6);
            assert!((coarse.series("ybar").unwrap()[c.len() - 1] - target).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_density_at_h_zero() {
        let p = baseline(0.0);
        let peak = stationary_density(&p, -1.0, -1.0).unwrap();
        let expected = 1.0 / (std::f64::consts::PI * p.sigma.powi(2) / p.theta).sqrt();
        assert!((peak / expected - 1.0).abs() < 1e-12);
        let z = partition_norm(&p, -1.0).unwrap();
        let mass = integrate(|x| log_weight(&p, -1.0, x).exp() / z, -6.0, 4.0, 0.0, 1e-13).value;
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn consistency_roots_at_h_zero() {
        let p = baseline(0.0);
        assert!((solve_consistency(&p, (-1.5, -0.5)).unwrap() + 1.0).abs() < 1e-10);
        assert!((solve_consistency(&p, (0.5, 1.5)).unwrap() - 1.0).abs() < 1e-10);
        assert!(matches!(
            solve_consistency(&p, (-0.9, -0.5)),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn shift_values() {
        let p = baseline(0.0);
        assert!((equilibrium_shift(&p, -1.0).unwrap() - 0.0015).abs() < 1e-14);
        assert!((equilibrium_shift(&p, 1.0).unwrap() + 0.0015).abs() < 1e-14);
        assert!((equilibrium_shift_closed_form(&p, -1.0) - 0.0015).abs() < 1e-16);
    }

    #[test]
    fn small_h_equilibrium_matches_first_order() {
        let h = 0.05;
        let p = baseline(h);
        let y = solve_consistency(&p, (-1.5, -0.5)).unwrap();
        let first_order = -1.0 + h * equilibrium_shift(&p, -1.0).unwrap();
        assert!((y - first_order).abs() < 5.0 * h * h, "y = {y}, first order = {first_order}");
        let report = equilibrium(&p, (-1.5, -0.5)).unwrap();
        assert_eq!(report.y0e, y);
        assert!(report.partition_norm > 0.0);
    }

    proptest! {
        #[test]
        fn gaussian_pointwise(theta in 0.5f64..50.0, sigma in 0.1f64..3.0, y in prop_oneof![Just(-1.0), Just(1.0)], u in -5.0f64..5.0) {
            let p = ModelParams::new(1.0, 0.0, 0.0, sigma, 0.5, theta, 10).unwrap();
            let x = y + u * sigma / theta.sqrt();
            let got = stationary_density(&p, y, x).unwrap();
            let want = (-theta * (x - y).powi(2) / sigma.powi(2)).exp() / (std::f64::consts::PI * sigma * sigma / theta).sqrt();
            prop_assert!((got / want - 1.0).abs() < 1e-12, "rel err {}", got / want - 1.0);
        }

        #[test]
        fn consistency_exact_at_h_zero(h0 in 0.1f64..5.0, theta0 in 0.1f64..5.0, theta in 0.1f64..50.0, sigma in 0.1f64..3.0) {
            let p = ModelParams::new(h0, 0.0, 0.0, sigma, theta0, theta, 10).unwrap();
            let y = solve_consistency(&p, (-1.5, -0.5)).unwrap();
            prop_assert!((y + 1.0).abs() < 1e-10);
        }

        #[test]
        fn shift_quadrature_matches_closed_form(h0 in 0.05f64..5.0, theta0 in 0.01f64..5.0, theta in 0.1f64..100.0, sigma in 0.05f64..3.0, s in prop_oneof![Just(-1.0), Just(1.0)]) {
            let p = ModelParams::new(h0, 0.0, 0.0, sigma, theta0, theta, 10).unwrap();
            let q = equilibrium_shift(&p, s).unwrap();
            let c = equilibrium_shift_closed_form(&p, s);
            prop_assert!((q / c - 1.0).abs() < 1e-8, "quad {} closed {}", q, c);
        }
    }
}
