//! Euler-Maruyama simulation of the agent system.
//!
//! Brownian increments come from ChaCha8 streams keyed by the run seed: stream
//! `0` drives the central agent and stream `j` drives local agent `j` (in the
//! reduced system stream `1` drives the empirical mean). A path is therefore a
//! pure function of `(params, cfg)`, independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::model::{ModelParams, SimConfig};
use crate::potential::V;

/// Full state of the `N + 1` agent system.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub x0: f64,
    pub x: Vec<f64>,
    pub t: f64,
}

impl EnsembleState {
    /// Every agent in the normal state `-1`.
    pub fn normal(n_agents: usize) -> Self {
        EnsembleState {
            x0: -1.0,
            x: vec![-1.0; n_agents],
            t: 0.0,
        }
    }

    pub fn xbar(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.x.len() as f64
    }
}

/// Which series to keep. `x0` and `xbar` are always recorded; `agents` adds
/// `x<j>` columns. Every `stride`-th Euler step is stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub stride: usize,
    pub agents: Vec<usize>,
}

impl Default for Record {
    fn default() -> Self {
        Record {
            stride: 1,
            agents: Vec::new(),
        }
    }
}

impl Record {
    pub fn every(stride: usize) -> Self {
        Record {
            stride,
            agents: Vec::new(),
        }
    }

    pub fn with_agents(mut self, agents: impl IntoIterator<Item = usize>) -> Self {
        self.agents = agents.into_iter().collect();
        self
    }
}

/// Stationary linear feedback `alpha_j = -theta_c (b X0 + d X_j + e Xbar)` in
/// the shifted coordinates `X = x + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackLaw {
    b_inf: f64,
    d_inf: f64,
    e_inf: f64,
    theta_c: f64,
}

impl FeedbackLaw {
    pub(crate) fn new(b_inf: f64, d_inf: f64, e_inf: f64, theta_c: f64) -> Self {
        FeedbackLaw {
            b_inf,
            d_inf,
            e_inf,
            theta_c,
        }
    }

    /// The law that exerts no control.
    pub fn zero(theta_c: f64) -> Self {
        Self::new(0.0, 0.0, 0.0, theta_c)
    }

    pub fn b_inf(&self) -> f64 {
        self.b_inf
    }

    pub fn d_inf(&self) -> f64 {
        self.d_inf
    }

    pub fn e_inf(&self) -> f64 {
        self.e_inf
    }

    pub fn theta_c(&self) -> f64 {
        self.theta_c
    }

    /// Control on the empirical mean, `-theta_c (b X0 + (d + e) Xbar)`.
    #[inline]
    pub fn mean_control(&self, x0: f64, xbar: f64) -> f64 {
        -self.theta_c * (self.b_inf * (x0 + 1.0) + (self.d_inf + self.e_inf) * (xbar + 1.0))
    }

    /// Total restoring rate of `xbar` under coupling `theta` plus control.
    pub fn effective_coupling(&self, theta: f64) -> f64 {
        theta + self.theta_c * (self.d_inf + self.e_inf)
    }
}

/// Seed of Monte Carlo replica `r`, a SplitMix64 mix of `(seed, r)`.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    let mut z = seed ^ replica.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn recording_grid(cfg: &SimConfig, stride: usize) -> Result<(PathGrid, usize)> {
    let stride = stride.max(1);
    let steps = cfg.n_steps();
    if steps % stride != 0 {
        return Err(Error::invalid(format!(
            "record stride {stride} does not divide the {steps} Euler steps"
        )));
    }
    Ok((PathGrid::uniform(cfg.t_final, steps / stride)?, stride))
}

/// Simulates `(x0, x_1..x_N)` from the all `-1` state.
pub fn simulate_full(params: &ModelParams, cfg: &SimConfig, record: &Record) -> Result<PathGrid> {
    simulate_full_from(params, cfg, record, EnsembleState::normal(params.n_agents))
}

/// Simulates the full system from an arbitrary initial state.
pub fn simulate_full_from(
    params: &ModelParams,
    cfg: &SimConfig,
    record: &Record,
    init: EnsembleState,
) -> Result<PathGrid> {
    params.validate()?;
    cfg.validate()?;
    let n = params.n_agents;
    if init.x.len() != n {
        return Err(Error::Shape(format!(
            "initial state has {} agents, params say {n}",
            init.x.len()
        )));
    }
    if let Some(&j) = record.agents.iter().find(|&&j| j >= n) {
        return Err(Error::invalid(format!("agent index {j} out of range (N = {n})")));
    }
    let (grid, stride) = recording_grid(cfg, record.stride)?;
    let m = grid.len();
    let mut rec_x0 = Vec::with_capacity(m);
    let mut rec_xbar = Vec::with_capacity(m);
    let mut rec_agents = vec![Vec::with_capacity(m); record.agents.len()];

    let dt = cfg.dt;
    let sq = dt.sqrt();
    let amp0 = params.sigma0 / (n as f64).sqrt() * sq;
    let amp = params.sigma * sq;
    let (h0, h, th0, th) = (params.h0, params.h, params.theta0, params.theta);
    let mut rng0 = stream(cfg.seed, 0);
    let mut rngs: Vec<ChaCha8Rng> = (1..=n as u64).map(|k| stream(cfg.seed, k)).collect();

    let mut x0 = init.x0;
    let mut x = init.x;
    let mut xbar = x.iter().sum::<f64>() / n as f64;
    let push = |x0: f64, xbar: f64, x: &[f64], rx0: &mut Vec<f64>, rxb: &mut Vec<f64>, ra: &mut [Vec<f64>]| {
        rx0.push(x0);
        rxb.push(xbar);
        for (col, &j) in ra.iter_mut().zip(&record.agents) {
            col.push(x[j]);
        }
    };
    push(x0, xbar, &x, &mut rec_x0, &mut rec_xbar, &mut rec_agents);

    for step in 1..=cfg.n_steps() {
        let x0_old = x0;
        x0 += (-h0 * V.d1(x0_old) - th0 * (x0_old - xbar)) * dt + amp0 * normal(&mut rng0);
        for (xj, rng) in x.iter_mut().zip(rngs.iter_mut()) {
            let v = *xj;
            *xj = v + (-h * V.d1(v) - th * (v - x0_old)) * dt + amp * normal(rng);
        }
        xbar = x.iter().sum::<f64>() / n as f64;
        if !(x0.is_finite() && xbar.is_finite()) {
            return Err(Error::Divergence {
                step,
                t: step as f64 * dt,
            });
        }
        if step % stride == 0 {
            push(x0, xbar, &x, &mut rec_x0, &mut rec_xbar, &mut rec_agents);
        }
    }

    let mut grid = grid.with_series("x0", rec_x0)?.with_series("xbar", rec_xbar)?;
    for (col, &j) in rec_agents.into_iter().zip(&record.agents) {
        grid.insert(&format!("x{j}"), col)?;
    }
    Ok(grid)
}

struct ReducedRun {
    grid: Option<PathGrid>,
    terminal: (f64, f64),
}

fn run_reduced(
    params: &ModelParams,
    cfg: &SimConfig,
    law: Option<&FeedbackLaw>,
    stride: Option<usize>,
    init: (f64, f64),
) -> Result<ReducedRun> {
    params.validate()?;
    cfg.validate()?;
    params.require_h_zero("the reduced (x0, xbar) simulation")?;
    let recording = match stride {
        Some(s) => Some(recording_grid(cfg, s)?),
        None => None,
    };
    let m = recording.as_ref().map_or(0, |(g, _)| g.len());
    let every = recording.as_ref().map_or(usize::MAX, |(_, s)| *s);
    let mut rec_x0 = Vec::with_capacity(m);
    let mut rec_xbar = Vec::with_capacity(m);
    let mut rec_u = Vec::with_capacity(m);

    let dt = cfg.dt;
    let scale = (dt / params.n_agents as f64).sqrt();
    let amp0 = params.sigma0 * scale;
    let amp = params.sigma * scale;
    let (h0, th0, th) = (params.h0, params.theta0, params.theta);
    let controlled = law.is_some();
    let law = law.copied().unwrap_or(FeedbackLaw::zero(0.0));
    let mut rng0 = stream(cfg.seed, 0);
    let mut rng1 = stream(cfg.seed, 1);

    let (mut x0, mut xbar) = init;
    if recording.is_some() {
        rec_x0.push(x0);
        rec_xbar.push(xbar);
        rec_u.push(law.mean_control(x0, xbar));
    }
    for step in 1..=cfg.n_steps() {
        let u = law.mean_control(x0, xbar);
        let d0 = -h0 * V.d1(x0) - th0 * (x0 - xbar);
        let d1 = -th * (xbar - x0) + u;
        x0 += d0 * dt + amp0 * normal(&mut rng0);
        xbar += d1 * dt + amp * normal(&mut rng1);
        if !(x0.is_finite() && xbar.is_finite()) {
            return Err(Error::Divergence {
                step,
                t: step as f64 * dt,
            });
        }
        if step % every == 0 {
            rec_x0.push(x0);
            rec_xbar.push(xbar);
            rec_u.push(law.mean_control(x0, xbar));
        }
    }
    let grid = match recording {
        Some((g, _)) => {
            let g = g.with_series("x0", rec_x0)?.with_series("xbar", rec_xbar)?;
            Some(if controlled { g.with_series("control", rec_u)? } else { g })
        }
        None => None,
    };
    Ok(ReducedRun {
        grid,
        terminal: (x0, xbar),
    })
}

/// Simulates the two-dimensional `(x0, xbar)` system, exact in law for `h = 0`.
pub fn simulate_reduced(params: &ModelParams, cfg: &SimConfig) -> Result<PathGrid> {
    simulate_reduced_with(params, cfg, 1, (-1.0, -1.0))
}

/// [`simulate_reduced`] with a record stride and initial point.
pub fn simulate_reduced_with(
    params: &ModelParams,
    cfg: &SimConfig,
    stride: usize,
    init: (f64, f64),
) -> Result<PathGrid> {
    Ok(run_reduced(params, cfg, None, Some(stride), init)?
        .grid
        .expect("recording requested"))
}

/// Terminal `(x0(T), xbar(T))` of the reduced system without storing the path.
pub fn reduced_terminal(params: &ModelParams, cfg: &SimConfig) -> Result<(f64, f64)> {
    Ok(run_reduced(params, cfg, None, None, (-1.0, -1.0))?.terminal)
}

/// Reduced system with the stationary feedback added to the `xbar` drift.
/// Records `x0`, `xbar` and `control`.
pub fn simulate_controlled(
    params: &ModelParams,
    cfg: &SimConfig,
    law: &FeedbackLaw,
) -> Result<PathGrid> {
    simulate_controlled_with(params, cfg, law, 1)
}

pub fn simulate_controlled_with(
    params: &ModelParams,
    cfg: &SimConfig,
    law: &FeedbackLaw,
    stride: usize,
) -> Result<PathGrid> {
    Ok(run_reduced(params, cfg, Some(law), Some(stride), (-1.0, -1.0))?
        .grid
        .expect("recording requested"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(h0: f64, sigma0: f64, sigma: f64) -> ModelParams {
        ModelParams::new(h0, 0.0, sigma0, sigma, 0.1, 10.0, 20).unwrap()
    }

    #[test]
    fn noiseless_equilibrium_is_fixed() {
        let p = ModelParams {
            sigma: 1e-300,
            ..params(0.0, 0.0, 1.0)
        };
        let cfg = SimConfig::new(5.0, 0.01, 3).unwrap();
        let g = simulate_full(&p, &cfg, &Record::default()).unwrap();
        assert!(g.series("x0").unwrap().iter().all(|&v| v == -1.0));
        assert!(g.series("xbar").unwrap().iter().all(|&v| v == -1.0));

        let p = ModelParams {
            sigma: 1e-300,
            ..params(0.7, 0.0, 1.0)
        };
        let g = simulate_reduced(&p, &cfg).unwrap();
        assert!(g.series("x0").unwrap().iter().all(|&v| v == -1.0));
        assert!(g.series("xbar").unwrap().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn deterministic() {
        let p = params(0.5, 0.1, 1.0);
        let cfg = SimConfig::new(2.0, 0.001, 42).unwrap();
        let rec = Record::every(10).with_agents([0, 5]);
        let a = simulate_full(&p, &cfg, &rec).unwrap();
        let b = simulate_full(&p, &cfg, &rec).unwrap();
        assert_eq!(a, b);
        let c = simulate_full(&p, &SimConfig { seed: 43, ..cfg }, &rec).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.len(), 201);
        assert!(a.get("x5").is_some());
    }

    #[test]
    fn xbar_is_exact_mean_of_agents() {
        let p = ModelParams::new(0.5, 0.3, 0.2, 1.0, 0.4, 2.0, 7).unwrap();
        let cfg = SimConfig::new(1.0, 0.01, 9).unwrap();
        let g = simulate_full(&p, &cfg, &Record::default().with_agents(0..7)).unwrap();
        let xbar = g.series("xbar").unwrap();
        for i in 0..g.len() {
            let s: f64 = (0..7).map(|j| g.series(&format!("x{j}")).unwrap()[i]).sum();
            assert_eq!(s / 7.0, xbar[i]);
        }
    }

    #[test]
    fn zero_law_reproduces_reduced() {
        let p = params(0.7, 0.5, 5.0);
        let cfg = SimConfig::new(10.0, 0.01, 5).unwrap();
        let a = simulate_reduced(&p, &cfg).unwrap();
        let b = simulate_controlled(&p, &cfg, &FeedbackLaw::zero(3.0)).unwrap();
        assert_eq!(a.series("x0").unwrap(), b.series("x0").unwrap());
        assert_eq!(a.series("xbar").unwrap(), b.series("xbar").unwrap());
        assert!(b.series("control").unwrap().iter().all(|&u| u == 0.0));
    }

    #[test]
    fn reduced_requires_h_zero() {
        let p = ModelParams::new(0.5, 0.1, 0.1, 1.0, 0.1, 10.0, 10).unwrap();
        let cfg = SimConfig::new(1.0, 0.1, 0).unwrap();
        assert!(matches!(simulate_reduced(&p, &cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn blow_up_reports_step() {
        // explicit Euler on the quartic with a huge step from far out
        let p = ModelParams::new(50.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1).unwrap();
        let cfg = SimConfig::new(100.0, 0.5, 0).unwrap();
        let init = EnsembleState {
            x0: 3.0,
            x: vec![-1.0],
            t: 0.0,
        };
        match simulate_full_from(&p, &cfg, &Record::default(), init) {
            Err(Error::Divergence { step, .. }) => assert!(step >= 1 && step < 200),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn replica_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| replica_seed(1, r)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(replica_seed(1, 0), replica_seed(2, 0));
    }

    #[test]
    fn stride_must_divide() {
        let p = params(0.5, 0.1, 1.0);
        let cfg = SimConfig::new(1.0, 0.01, 0).unwrap();
        assert!(simulate_full(&p, &cfg, &Record::every(7)).is_err());
    }
}
