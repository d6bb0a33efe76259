//! Uniform time grid carrying named scalar series.

use std::fmt::Write as _;
use std::io;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    t: Vec<f64>,
    series: Vec<(String, Vec<f64>)>,
}

impl PathGrid {
    /// Grid `0, dt, ..., n_intervals*dt` with no series attached.
    pub fn uniform(t_final: f64, n_intervals: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) || n_intervals == 0 {
            return Err(Error::invalid(format!(
                "uniform grid needs T > 0 and at least one interval (T = {t_final}, n = {n_intervals})"
            )));
        }
        let dt = t_final / n_intervals as f64;
        let mut t: Vec<f64> = (0..=n_intervals).map(|i| i as f64 * dt).collect();
        t[n_intervals] = t_final;
        Ok(PathGrid { t, series: Vec::new() })
    }

    /// Wraps an existing time vector; it must be uniformly spaced.
    pub fn from_times(t: Vec<f64>) -> Result<Self> {
        if t.len() < 2 {
            return Err(Error::Shape("a grid needs at least two points".into()));
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Shape("grid times must be strictly increasing".into()));
        }
        // steps of `i * dt` grids carry rounding of order eps * |t|
        let tol = 1e-12 * t[0].abs().max(t[t.len() - 1].abs()).max(1.0);
        for (i, w) in t.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dt).abs() > tol {
                return Err(Error::Shape(format!(
                    "grid step {i} is {step}, expected uniform step {dt}"
                )));
            }
        }
        Ok(PathGrid { t, series: Vec::new() })
    }

    pub fn with_series(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        self.insert(name, values)?;
        Ok(self)
    }

    /// Adds or replaces a series.
    pub fn insert(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.t.len() {
            return Err(Error::Shape(format!(
                "series `{name}` has {} points, grid has {}",
                values.len(),
                self.t.len()
            )));
        }
        match self.series.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = values,
            None => self.series.push((name.to_string(), values)),
        }
        Ok(())
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64
    }

    pub fn t_final(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Like [`get`](Self::get) but reports a shape error when missing.
    pub fn series(&self, name: &str) -> Result<&[f64]> {
        self.get(name)
            .ok_or_else(|| Error::Shape(format!("grid has no series `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.series.iter().map(|(n, _)| n.as_str())
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// CSV with header `t,<series...>`, LF endings, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (name, _) in &self.series {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.t.len() {
            let _ = write!(out, "{:.16e}", self.t[i]);
            for (_, v) in &self.series {
                let _ = write!(out, ",{:.16e}", v[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Shape("empty CSV".into()))?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names.first() != Some(&"t") {
            return Err(Error::Shape("CSV header must start with `t`".into()));
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() {
                return Err(Error::Shape(format!(
                    "CSV row {} has {} fields, header has {}",
                    row + 1,
                    fields.len(),
                    names.len()
                )));
            }
            for (c, f) in fields.iter().enumerate() {
                let x = f.trim().parse::<f64>().map_err(|_| {
                    Error::Shape(format!("CSV row {}: `{f}` is not a number", row + 1))
                })?;
                cols[c].push(x);
            }
        }
        let mut cols = cols.into_iter();
        let mut grid = PathGrid::from_times(cols.next().unwrap())?;
        for (name, col) in names[1..].iter().zip(cols) {
            grid.insert(name, col)?;
        }
        Ok(grid)
    }
}
