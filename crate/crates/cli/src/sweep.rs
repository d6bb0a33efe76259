//! `name:start:end:count` parameter sweeps over a uniform grid.

use std::str::FromStr;

use sysrisk::model::{RawConfig, KEYS};

use crate::error::{CliError, Result};

const INTEGER_KEYS: [&str; 2] = ["N", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl FromStr for Sweep {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| CliError::Config(format!("sweep `{s}`: {why}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [name, start, end, count] = parts[..] else {
            return Err(bad("expected name:start:end:count"));
        };
        if !KEYS.contains(&name) {
            return Err(bad("unknown parameter"));
        }
        let num = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite());
        let (Some(start), Some(end)) = (num(start), num(end)) else {
            return Err(bad("start and end must be finite numbers"));
        };
        let count: usize = count.parse().map_err(|_| bad("count must be a positive integer"))?;
        if count == 0 {
            return Err(bad("count must be a positive integer"));
        }
        if count == 1 && start != end {
            return Err(bad("a single point needs start = end"));
        }
        let sweep = Sweep {
            name: name.to_string(),
            start,
            end,
            count,
        };
        if INTEGER_KEYS.contains(&name) {
            for v in sweep.values() {
                if v.fract() != 0.0 || v < 0.0 {
                    return Err(bad("integer parameter takes non-integer values"));
                }
            }
        }
        Ok(sweep)
    }
}

impl Sweep {
    /// `count` equally spaced values from `start` to `end` inclusive.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.end } else { self.start + i as f64 * step })
            .collect()
    }

    /// Copy of `base` with the swept key set to `value`.
    pub fn apply(&self, base: &RawConfig, value: f64) -> Result<RawConfig> {
        let mut raw = base.clone();
        let text = if INTEGER_KEYS.contains(&self.name.as_str()) {
            format!("{}", value as u64)
        } else {
            format!("{value:?}")
        };
        raw.set(&self.name, &text)?;
        Ok(raw)
    }

    pub fn describe(&self) -> String {
        format!("{}:{:?}:{:?}:{}", self.name, self.start, self.end, self.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_hits_both_ends() {
        let s: Sweep = "h0:0.1:1.0:100".parse().unwrap();
        let v = s.values();
        assert_eq!(v.len(), 100);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[99], 1.0);
        assert!((v[1] - v[0] - 0.9 / 99.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_sweeps_rejected() {
        for s in ["h0:0:1", "nope:0:1:3", "h0:a:1:3", "h0:0:1:0", "N:1:2:3", "h0:0:1:1"] {
            assert!(s.parse::<Sweep>().is_err(), "{s}");
        }
        assert_eq!("seed:1:10:10".parse::<Sweep>().unwrap().values()[9], 10.0);
    }
}
