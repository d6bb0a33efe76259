//! Parameter records and the flat `key=value` configuration format.
//!
//! ```text
//! # weakly coupled, stiff local agents
//! h0=0.5
//! sigma0=0.1
//! theta0=0.1
//! sigma=1.0
//! theta=10
//! N=100
//! T=1000
//! dt=0.001
//! seed=1
//! ```
//!
//! Recognised keys: `h0, h, sigma0, sigma, theta0, theta, N, T, dt, seed,
//! burn_in_fraction, theta_c, H0`. Required: `h0, sigma, theta0, theta, N, T,
//! dt`. Defaults: `h = 0`, `sigma0 = 0`, `seed = 0`, `burn_in_fraction = 0.1`.
//! The control record exists only when `theta_c` is given; `H0` then defaults
//! to `2 * h0`, the curvature of `h0 V` at the normal state. The control
//! horizon is `T`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const KEYS: [&str; 13] = [
    "h0",
    "h",
    "sigma0",
    "sigma",
    "theta0",
    "theta",
    "N",
    "T",
    "dt",
    "seed",
    "burn_in_fraction",
    "theta_c",
    "H0",
];

const REQUIRED: [&str; 7] = ["h0", "sigma", "theta0", "theta", "N", "T", "dt"];

pub const DEFAULT_BURN_IN_FRACTION: f64 = 0.1;

/// Model constants of the central agent / local agents system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Intrinsic stability of the central agent.
    pub h0: f64,
    /// Intrinsic stability of each local agent.
    pub h: f64,
    /// Noise strength of the central agent (scaled by `1/sqrt(N)`).
    pub sigma0: f64,
    /// Noise strength of each local agent.
    pub sigma: f64,
    /// Pull of the central agent towards the local mean.
    pub theta0: f64,
    /// Pull of each local agent towards the central agent.
    pub theta: f64,
    pub n_agents: usize,
}

impl ModelParams {
    pub fn new(
        h0: f64,
        h: f64,
        sigma0: f64,
        sigma: f64,
        theta0: f64,
        theta: f64,
        n_agents: usize,
    ) -> Result<Self> {
        let p = ModelParams {
            h0,
            h,
            sigma0,
            sigma,
            theta0,
            theta,
            n_agents,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        nonneg("h0", self.h0)?;
        nonneg("h", self.h)?;
        nonneg("sigma0", self.sigma0)?;
        positive("sigma", self.sigma)?;
        nonneg("theta0", self.theta0)?;
        nonneg("theta", self.theta)?;
        if self.n_agents == 0 {
            return Err(Error::config("N", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn require_h_zero(&self, op: &str) -> Result<()> {
        if self.h != 0.0 {
            return Err(Error::invalid(format!(
                "{op} requires h = 0 (got h = {})",
                self.h
            )));
        }
        Ok(())
    }

    pub fn with_h0(mut self, h0: f64) -> Self {
        self.h0 = h0;
        self
    }
}

/// Weights of the linear-quadratic control problem on the local agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub theta_c: f64,
    /// Linearized stiffness `H0` of the central agent's potential force.
    pub h_cap0: f64,
    pub horizon: f64,
}

impl ControlParams {
    pub fn new(theta_c: f64, h_cap0: f64, horizon: f64) -> Result<Self> {
        let c = ControlParams {
            theta_c,
            h_cap0,
            horizon,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        positive("theta_c", self.theta_c)?;
        nonneg("H0", self.h_cap0)?;
        positive("T", self.horizon)?;
        Ok(())
    }
}

/// Time discretization and seeding of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub burn_in_fraction: f64,
}

impl SimConfig {
    pub fn new(t_final: f64, dt: f64, seed: u64) -> Result<Self> {
        let c = SimConfig {
            t_final,
            dt,
            seed,
            burn_in_fraction: DEFAULT_BURN_IN_FRACTION,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        positive("T", self.t_final)?;
        positive("dt", self.dt)?;
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::config("burn_in_fraction", "must lie in [0, 1)"));
        }
        if self.dt >= self.t_final {
            return Err(Error::config("dt", "must be smaller than T"));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(
                "dt",
                format!("T/dt = {ratio} is not an integer"),
            ));
        }
        Ok(())
    }

    /// Number of Euler steps, `T / dt`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// First step index that belongs to the post burn-in window.
    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in_fraction * self.n_steps() as f64).round() as usize
    }
}

/// A fully parsed and validated configuration document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub sim: SimConfig,
    pub control: Option<ControlParams>,
}

/// Raw `key=value` map, prior to validation. Useful for applying overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Syntax {
                line: idx + 1,
                reason: format!("expected key=value, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            if value.is_empty() {
                return Err(Error::config(key, "empty value"));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::config(key, "duplicate key"));
            }
        }
        Ok(RawConfig { entries })
    }

    /// Sets or replaces `key`. The key must be one of [`KEYS`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies a `key=value` override string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| Error::Syntax {
            line: 0,
            reason: format!("override `{assignment}` is not key=value"),
        })?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn validate(&self) -> Result<ExperimentConfig> {
        // per-key range checks first so that the error names the offending key
        let mut num = BTreeMap::new();
        for (k, v) in &self.entries {
            match k.as_str() {
                "N" | "seed" => {
                    v.parse::<u64>()
                        .map_err(|_| Error::config(k, format!("`{v}` is not a nonnegative integer")))?;
                }
                _ => {
                    let x: f64 = v
                        .parse()
                        .map_err(|_| Error::config(k, format!("`{v}` is not a number")))?;
                    if !x.is_finite() {
                        return Err(Error::config(k, "must be finite"));
                    }
                    num.insert(k.as_str(), x);
                }
            }
        }
        for (k, x) in &num {
            match *k {
                "sigma" | "T" | "dt" | "theta_c" => positive(k, *x)?,
                "burn_in_fraction" => {
                    if !(0.0..1.0).contains(x) {
                        return Err(Error::config(k, "must lie in [0, 1)"));
                    }
                }
                _ => nonneg(k, *x)?,
            }
        }
        if let Some(n) = self.get("N") {
            if n.parse::<u64>().ok() == Some(0) {
                return Err(Error::config("N", "must be at least 1"));
            }
        }
        for key in REQUIRED {
            if !self.entries.contains_key(key) {
                return Err(Error::config(key, "missing required key"));
            }
        }
        if self.entries.contains_key("H0") && !self.entries.contains_key("theta_c") {
            return Err(Error::config("theta_c", "required when H0 is given"));
        }

        let get = |k: &str, default: f64| num.get(k).copied().unwrap_or(default);
        let model = ModelParams::new(
            get("h0", 0.0),
            get("h", 0.0),
            get("sigma0", 0.0),
            get("sigma", 0.0),
            get("theta0", 0.0),
            get("theta", 0.0),
            self.get("N").unwrap().parse::<u64>().unwrap() as usize,
        )?;
        let sim = SimConfig {
            t_final: get("T", 0.0),
            dt: get("dt", 0.0),
            seed: self.get("seed").map_or(0, |s| s.parse().unwrap()),
            burn_in_fraction: get("burn_in_fraction", DEFAULT_BURN_IN_FRACTION),
        };
        sim.validate()?;
        let control = match num.get("theta_c") {
            Some(&theta_c) => Some(ControlParams::new(
                theta_c,
                get("H0", 2.0 * model.h0),
                sim.t_final,
            )?),
            None => None,
        };
        Ok(ExperimentConfig {
            model,
            sim,
            control,
        })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        RawConfig::parse(text)?.validate()
    }

    /// Serializes every field, including defaulted ones. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_config_string(&self) -> String {
        let m = &self.model;
        let s = &self.sim;
        let mut out = String::new();
        let _ = writeln!(out, "h0={:?}", m.h0);
        let _ = writeln!(out, "h={:?}", m.h);
        let _ = writeln!(out, "sigma0={:?}", m.sigma0);
        let _ = writeln!(out, "sigma={:?}", m.sigma);
        let _ = writeln!(out, "theta0={:?}", m.theta0);
        let _ = writeln!(out, "theta={:?}", m.theta);
        let _ = writeln!(out, "N={}", m.n_agents);
        let _ = writeln!(out, "T={:?}", s.t_final);
        let _ = writeln!(out, "dt={:?}", s.dt);
        let _ = writeln!(out, "seed={}", s.seed);
        let _ = writeln!(out, "burn_in_fraction={:?}", s.burn_in_fraction);
        if let Some(c) = &self.control {
            let _ = writeln!(out, "theta_c={:?}", c.theta_c);
            let _ = writeln!(out, "H0={:?}", c.h_cap0);
        }
        out
    }

    pub fn to_raw(&self) -> RawConfig {
        RawConfig::parse(&self.to_config_string()).expect("serialized config always parses")
    }
}

/// Parses a configuration document into its three records.
pub fn parse_config(text: &str) -> Result<(ModelParams, SimConfig, Option<ControlParams>)> {
    let cfg = ExperimentConfig::parse(text)?;
    Ok((cfg.model, cfg.sim, cfg.control))
}

fn nonneg(key: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite and >= 0 (got {x})")))
    }
}

fn positive(key: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite and > 0 (got {x})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BASELINE: &str = "h0=0.5\nsigma0=0.1\ntheta0=0.1\nsigma=1.0\ntheta=10\nN=100\nT=1000\ndt=0.001\nseed=1\nh=0";
    const CONTROLLED: &str = "h0=0.7\nsigma0=0.5\ntheta0=1.0\nsigma=5.0\ntheta=1.0\nN=100\nT=1000\ndt=0.01\nh=0\nseed=1";

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn fluctuation_table() {
        let (m, s, c) = parse_config(BASELINE).unwrap();
        assert_eq!(m, ModelParams::new(0.5, 0.0, 0.1, 1.0, 0.1, 10.0, 100).unwrap());
        assert_eq!(
            s,
            SimConfig {
                t_final: 1000.0,
                dt: 0.001,
                seed: 1,
                burn_in_fraction: 0.1
            }
        );
        assert!(c.is_none());
        assert_eq!(s.n_steps(), 1_000_000);
        assert_eq!(s.burn_in_steps(), 100_000);
    }

    #[test]
    fn control_table() {
        let (m, s, c) = parse_config(CONTROLLED).unwrap();
        assert_eq!(m, ModelParams::new(0.7, 0.0, 0.5, 5.0, 1.0, 1.0, 100).unwrap());
        assert_eq!(s.n_steps(), 100_000);
        assert!(c.is_none());

        let (_, _, c) = parse_config(&format!("{CONTROLLED}\ntheta_c=2")).unwrap();
        let c = c.unwrap();
        assert_eq!(c.theta_c, 2.0);
        assert!((c.h_cap0 - 1.4).abs() < 1e-15);
        assert_eq!(c.horizon, 1000.0);
    }

    #[test]
    fn zero_sigma_names_sigma() {
        assert_eq!(key_of(parse_config("sigma=0").unwrap_err()), "sigma");
    }

    #[test]
    fn unknown_and_missing_keys() {
        assert_eq!(key_of(parse_config("gamma=1").unwrap_err()), "gamma");
        assert_eq!(key_of(parse_config("h0=1\nsigma=1").unwrap_err()), "theta0");
        let bad_dt = BASELINE.replace("dt=0.001", "dt=0.0007");
        assert_eq!(key_of(parse_config(&bad_dt).unwrap_err()), "dt");
        let neg = BASELINE.replace("theta=10", "theta=-1");
        assert_eq!(key_of(parse_config(&neg).unwrap_err()), "theta");
        let dup = format!("{BASELINE}\nh0=2");
        assert_eq!(key_of(parse_config(&dup).unwrap_err()), "h0");
    }

    #[test]
    fn malformed_line_and_comments() {
        assert!(matches!(
            parse_config("h0 0.5").unwrap_err(),
            Error::Syntax { line: 1, .. }
        ));
        let commented = format!("# header\n{}\n  # trailing\n", BASELINE.replace("h0=0.5", "h0=0.5 # central"));
        assert_eq!(parse_config(&commented).unwrap(), parse_config(BASELINE).unwrap());
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = RawConfig::parse(BASELINE).unwrap();
        raw.apply_override("h0=0.25").unwrap();
        assert_eq!(raw.validate().unwrap().model.h0, 0.25);
        assert!(raw.apply_override("bogus=1").is_err());
    }

    proptest! {
        #[test]
        fn serialize_roundtrip(
            h0 in 0.0f64..10.0, h in 0.0f64..1.0, sigma0 in 0.0f64..2.0, sigma in 0.01f64..5.0,
            theta0 in 0.0f64..5.0, theta in 0.0f64..50.0, n in 1usize..10_000,
            steps in 2u32..100_000, dt_exp in -4i32..0, seed in any::<u64>(), burn in 0.0f64..0.9,
            control in proptest::option::of((0.01f64..10.0, 0.0f64..5.0)),
        ) {
            let dt = 10f64.powi(dt_exp);
            let cfg = ExperimentConfig {
                model: ModelParams::new(h0, h, sigma0, sigma, theta0, theta, n).unwrap(),
                sim: SimConfig { t_final: steps as f64 * dt, dt, seed, burn_in_fraction: burn },
                control: control.map(|(tc, hc)| ControlParams { theta_c: tc, h_cap0: hc, horizon: steps as f64 * dt }),
            };
            prop_assume!(cfg.sim.validate().is_ok());
            let back = ExperimentConfig::parse(&cfg.to_config_string()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
