//! Monte Carlo checks of the simulators against exact Gaussian moments.

use sysrisk::fluctuations::terminal_covariance_h0_zero;
use sysrisk::sde::{reduced_terminal, replica_seed, simulate_full, Record};
use sysrisk::stats::sample_covariance;
use sysrisk::{ModelParams, SimConfig};

fn replicas(p: &ModelParams, t_final: f64, dt: f64, n: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|r| reduced_terminal(p, &SimConfig::new(t_final, dt, replica_seed(seed, r)).unwrap()).unwrap())
        .unzip()
}

#[test]
fn terminal_covariance_matches_exact() {
    let p = ModelParams::new(0.0, 0.0, 0.5, 1.0, 1.0, 2.0, 100).unwrap();
    let t_final = 2.0;
    let (x0, xb) = replicas(&p, t_final, 1e-3, 10_000, 42);
    let (v0, vb, c) = sample_covariance(&x0, &xb);
    let (exact, _) = terminal_covariance_h0_zero(&p, t_final).unwrap();
    let scale = exact[(0, 0)].max(exact[(1, 1)]);
    assert!((v0 / exact[(0, 0)] - 1.0).abs() < 0.05, "{v0} vs {}", exact[(0, 0)]);
    assert!((vb / exact[(1, 1)] - 1.0).abs() < 0.05, "{vb} vs {}", exact[(1, 1)]);
    assert!((c - exact[(0, 1)]).abs() < 0.05 * scale, "{c} vs {}", exact[(0, 1)]);
    let mean = x0.iter().sum::<f64>() / x0.len() as f64;
    assert!((mean + 1.0).abs() < 4.0 * (v0 / x0.len() as f64).sqrt());
}

#[test]
fn full_and_reduced_systems_agree_in_law() {
    // with h = 0 the empirical mean of the full system is exactly the reduced
    // mean field; compare terminal variances of xbar over replicas
    let p = ModelParams::new(0.5, 0.0, 0.5, 1.0, 1.0, 2.0, 20).unwrap();
    let (t_final, dt, n) = (1.0, 1e-2, 4000);
    let (_, reduced) = replicas(&p, t_final, dt, n, 7);
    let full: Vec<f64> = (0..n)
        .map(|r| {
            let cfg = SimConfig::new(t_final, dt, replica_seed(8, r)).unwrap();
            let g = simulate_full(&p, &cfg, &Record::every(100)).unwrap();
            *g.series("xbar").unwrap().last().unwrap()
        })
        .collect();
    let var = |x: &[f64]| sample_covariance(x, x).0;
    let (vr, vf) = (var(&reduced), var(&full));
    // both estimates carry about sqrt(2 / n) relative error
    assert!((vr / vf - 1.0).abs() < 5.0 * (4.0 / n as f64).sqrt(), "{vr} vs {vf}");
}
