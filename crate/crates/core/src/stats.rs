//! Time-series statistics for long correlated simulation output.

use crate::error::{Error, Result};

/// Estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.std_error
    }
}

pub const DEFAULT_BATCHES: usize = 30;

/// Mean of `x` with a batch-means standard error over `n_batches`
/// contiguous, equally sized batches (a trailing remainder is dropped).
pub fn batch_mean(x: &[f64], n_batches: usize) -> Result<Estimate> {
    if n_batches < 2 || x.len() < n_batches {
        return Err(Error::invalid(format!(
            "batch means needs at least 2 batches and one sample per batch (len {}, batches {n_batches})",
            x.len()
        )));
    }
    let size = x.len() / n_batches;
    let means: Vec<f64> = x
        .chunks_exact(size)
        .take(n_batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    Ok(Estimate {
        value: grand,
        std_error: (var / n_batches as f64).sqrt(),
    })
}

/// Covariance of two series with batch-means standard error. Products are
/// centered at the full-sample means.
pub fn batch_covariance(x: &[f64], y: &[f64], n_batches: usize) -> Result<Estimate> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let prod: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    batch_mean(&prod, n_batches)
}

pub fn batch_variance(x: &[f64], n_batches: usize) -> Result<Estimate> {
    batch_covariance(x, x, n_batches)
}

/// Sample covariance matrix entries `(var_x, var_y, cov)` of paired samples.
pub fn sample_covariance(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    let d = n - 1.0;
    (sxx / d, syy / d, sxy / d)
}

/// Counts crossings between the wells at `-1` and `+1`. A crossing is
/// registered when the series reaches `+band` while in the lower well or
/// `-band` while in the upper well. The starting well is the sign of `x[0]`
/// (lower when `x[0] <= 0`).
pub fn count_transitions(x: &[f64], band: f64) -> usize {
    let Some(&first) = x.first() else {
        return 0;
    };
    let mut upper = first > 0.0;
    let mut count = 0;
    for &v in x {
        if !upper && v >= band {
            upper = true;
            count += 1;
        } else if upper && v <= -band {
            upper = false;
            count += 1;
        }
    }
    count
}
