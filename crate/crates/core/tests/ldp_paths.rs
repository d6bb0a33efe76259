//! Most probable transition paths checked against independent references:
//! the explicit `h0 = 0` solution, parameter limits and fine continuation.

use sysrisk::ldp::optimality::{check_optimality, DEFAULT_EPSILON, DEFAULT_TOLERANCE};
use sysrisk::ldp::rate::{rate_degenerate_jets, rate_nondegenerate_jets};
use sysrisk::ldp::{
    closed_form_path_h0_zero, continue_in_h0, solve_bvp_degenerate, solve_bvp_nondegenerate, BvpSolution,
    InitialGuess,
};
use sysrisk::ModelParams;

fn params(h0: f64, sigma0: f64, sigma: f64, theta0: f64, theta: f64) -> ModelParams {
    ModelParams::new(h0, 0.0, sigma0, sigma, theta0, theta, 100).unwrap()
}

fn max_diff(a: &BvpSolution, b: &BvpSolution, name: &str) -> f64 {
    let (x, y) = (a.grid.series(name).unwrap(), b.grid.series(name).unwrap());
    x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Explicit `h0 = 0` minimizer `x0(t)`, written out from the Euler-Lagrange
/// solution `A + Bt + C e^{tb t} + D e^{-tb t}` fitted to the boundary data.
fn explicit_x0(theta0: f64, theta: f64, t_final: f64, t: f64) -> f64 {
    let tb = theta0 + theta;
    let h = t_final / 2.0;
    let s = t - h;
    // odd about the midpoint: x0 = B s + C sinh(tb s), with x0(h) = 1, x0'(h) = 0
    let sh = (tb * h).sinh();
    let ch = (tb * h).cosh();
    let c = -1.0 / (h * tb * ch - sh);
    let b = -c * tb * ch;
    b * s + c * (tb * s).sinh()
}

#[test]
fn explicit_solution_is_reproduced() {
    let (th0, th, t) = (0.7, 1.8, 6.0);
    let p = params(0.0, 0.0, 1.0, th0, th);
    let s = solve_bvp_degenerate(&p, t, 1000, &InitialGuess::Auto).unwrap();
    let err = s
        .grid
        .t()
        .iter()
        .zip(s.grid.series("x0").unwrap())
        .map(|(&ti, x)| (x - explicit_x0(th0, th, t, ti)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn mesh_refinement_reduces_error_fourfold() {
    let p = params(0.0, 0.0, 1.0, 1.0, 1.0);
    let errs: Vec<f64> = [21, 41, 81, 161]
        .iter()
        .map(|&m| {
            let s = solve_bvp_degenerate(&p, 10.0, m, &InitialGuess::Auto).unwrap();
            let c = closed_form_path_h0_zero(&p, 10.0, m).unwrap();
            max_diff(&s, &c, "x0")
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] >= 4.0 * w[1], "{errs:?}");
    }
}

#[test]
fn rate_monotone_in_couplings() {
    let values = [0.5, 1.0, 2.0];
    let mut table = [[0.0; 3]; 3];
    for (i, &th) in values.iter().enumerate() {
        for (j, &th0) in values.iter().enumerate() {
            let p = params(0.0, 0.0, 1.0, th0, th);
            table[i][j] = solve_bvp_degenerate(&p, 10.0, 800, &InitialGuess::Auto).unwrap().rate_value;
        }
    }
    for i in 0..3 {
        for j in 0..2 {
            // non-increasing in theta0, non-decreasing in theta
            assert!(table[i][j + 1] <= table[i][j], "{table:?}");
            assert!(table[j + 1][i] >= table[j][i], "{table:?}");
        }
    }
}

#[test]
fn rate_non_increasing_in_sigma() {
    let rates: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&s| {
            let p = params(1.0, 0.0, s, 1.0, 1.0);
            continue_in_h0(&p, 10.0, &[0.0, 0.5, 1.0], 800).unwrap().pop().unwrap().rate_value
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{rates:?}");
}

#[test]
fn rate_non_decreasing_in_h0() {
    for s0 in [0.0, 0.5] {
        let p = params(0.0, s0, 1.0, 1.0, 1.0);
        let sols = continue_in_h0(&p, 10.0, &[0.0, 0.5, 1.0, 2.0], 1000).unwrap();
        assert!(sols.windows(2).all(|w| w[1].rate_value >= w[0].rate_value));
    }
}

#[test]
fn large_central_noise_swaps_roles() {
    // with sigma0 -> infinity the central agent is free and the mean field is
    // slaved to it: sigma0^2 I tends to the degenerate rate with roles swapped
    let (th0, th, t) = (0.5, 2.0, 10.0);
    let sigma0 = 1e3;
    let p = params(0.0, sigma0, 1.0, th0, th);
    let s = solve_bvp_nondegenerate(&p, t, 2000, &InitialGuess::Auto).unwrap();
    let swapped = params(0.0, 0.0, 1.0, th, th0);
    let reference = sysrisk::ldp::closed_form_rate_h0_zero(&swapped, t);
    let scaled = s.rate_value * sigma0 * sigma0;
    assert!((scaled / reference - 1.0).abs() < 1e-4, "{scaled} vs {reference}");
    // xbar follows the slaved shape of the swapped problem
    let c = closed_form_path_h0_zero(&swapped, t, 2000).unwrap();
    let err = s
        .grid
        .series("xbar")
        .unwrap()
        .iter()
        .zip(c.grid.series("x0").unwrap())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn nondegenerate_solutions_are_stationary() {
    for (h0, s0, th0, th) in [(0.5, 0.3, 2.0, 0.5), (2.0, 1.0, 0.5, 3.0)] {
        let p = params(0.0, s0, 1.0, th0, th);
        let s = continue_in_h0(&p, 8.0, &[0.0, h0 / 2.0, h0], 1500).unwrap().pop().unwrap();
        let r = check_optimality(&s, &p.with_h0(h0), 20, 5, DEFAULT_EPSILON, DEFAULT_TOLERANCE).unwrap();
        assert!(r.passed, "{}", r.max_relative_derivative);
    }
}

#[test]
fn large_jump_matches_fine_schedule() {
    for s0 in [0.0, 0.5] {
        let p = params(0.0, s0, 1.0, 1.0, 1.0);
        let jump = continue_in_h0(&p, 10.0, &[0.0, 10.0], 1000).unwrap().pop().unwrap();
        let fine: Vec<f64> = (0..=10).map(f64::from).collect();
        let reference = continue_in_h0(&p, 10.0, &fine, 1000).unwrap().pop().unwrap();
        assert!((jump.rate_value - reference.rate_value).abs() < 1e-4);
        assert!(max_diff(&jump, &reference, "x0") < 1e-4);
        assert!(max_diff(&jump, &reference, "xbar") < 1e-4);
    }
}

#[test]
fn rates_agree_as_central_noise_vanishes() {
    let p = params(1.0, 0.0, 1.0, 1.0, 1.0);
    let s = continue_in_h0(&p, 10.0, &[0.0, 0.5, 1.0], 1000).unwrap().pop().unwrap();
    let g = &s.grid;
    let (x, v, a) = (g.series("x0").unwrap(), g.series("dx0").unwrap(), g.series("d2x0").unwrap());
    let dv = |x: f64| x * x * x - x;
    let d2v = |x: f64| 3.0 * x * x - 1.0;
    // mean field reconstructed so the central channel has zero residual
    let xb: Vec<f64> = x.iter().zip(v).map(|(&x, &v)| x + (v + p.h0 * dv(x)) / p.theta0).collect();
    let vb: Vec<f64> = x
        .iter()
        .zip(v)
        .zip(a)
        .map(|((&x, &v), &a)| v + (a + p.h0 * d2v(x) * v) / p.theta0)
        .collect();
    let degenerate = rate_degenerate_jets(g.dt(), x, v, a, &p);
    for s0 in [1e-2, 1e-4, 1e-6] {
        let q = ModelParams { sigma0: s0, ..p };
        let nondeg = rate_nondegenerate_jets(g.dt(), x, v, &xb, &vb, &q);
        assert!((nondeg / degenerate - 1.0).abs() < 1e-9, "{s0}: {nondeg} vs {degenerate}");
    }
}
