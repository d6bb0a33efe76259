//! Banded LU factorization with partial pivoting.
//!
//! Row `i` stores columns `i - kl ..= i + ku + kl`; the extra `kl`
//! superdiagonals hold the fill-in produced by row interchanges.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
    factored: bool,
}

impl BandedLu {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            piv: Vec::new(),
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    /// Accumulates `v` into entry `(i, j)`, which must lie in the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        if !self.in_band(i, j) {
            return Err(Error::Shape(format!(
                "entry ({i}, {j}) outside band kl={}, ku={}",
                self.kl, self.ku
            )));
        }
        let k = self.idx(i, j);
        self.data[k] += v;
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku + self.kl {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// In-place factorization. Fails on an exactly singular pivot column.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        self.piv = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::invalid(format!("singular banded matrix at column {k}")));
            }
            self.piv[k] = p;
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = rhs` in place using the stored factors.
    pub fn solve(&self, rhs: &mut [f64]) -> Result<()> {
        if !self.factored {
            return Err(Error::invalid("banded matrix not factored"));
        }
        if rhs.len() != self.n {
            return Err(Error::Shape(format!(
                "rhs has length {}, matrix has dimension {}",
                rhs.len(),
                self.n
            )));
        }
        let n = self.n;
        let kl = self.kl;
        for k in 0..n {
            rhs.swap(k, self.piv[k]);
            let bk = rhs[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    rhs[i] -= self.data[self.idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = rhs[k];
            for j in k + 1..=(k + self.ku + kl).min(n - 1) {
                s -= self.data[self.idx(k, j)] * rhs[j];
            }
            rhs[k] = s / self.data[self.idx(k, k)];
        }
        Ok(())
    }
}
