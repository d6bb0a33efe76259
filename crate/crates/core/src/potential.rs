//! The quartic double-well potential `V(x) = x^4/4 - x^2/2`.
//!
//! Stable states sit at `x = -1` (normal) and `x = +1` (failed), with a local
//! maximum at `x = 0`. Both the central agent and the local agents use this
//! potential.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuarticDoubleWell;

impl QuarticDoubleWell {
    /// Highest derivative order offered; the fifth derivative vanishes.
    pub const MAX_ORDER: usize = 4;

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let x2 = x * x;
        0.25 * x2 * x2 - 0.5 * x2
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        x * x * x - x
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        3.0 * x * x - 1.0
    }

    #[inline]
    pub fn d3(&self, x: f64) -> f64 {
        6.0 * x
    }

    #[inline]
    pub fn d4(&self, _x: f64) -> f64 {
        6.0
    }

    /// `d^k V / dx^k` at `x` for `k` in `0..=4`.
    pub fn eval_derivative(&self, order: usize, x: f64) -> Result<f64> {
        match order {
            0 => Ok(self.value(x)),
            1 => Ok(self.d1(x)),
            2 => Ok(self.d2(x)),
            3 => Ok(self.d3(x)),
            4 => Ok(self.d4(x)),
            k => Err(Error::invalid(format!(
                "potential derivative order {k} not offered (0..=4)"
            ))),
        }
    }
}

pub const V: QuarticDoubleWell = QuarticDoubleWell;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn named_values() {
        assert_eq!(V.eval_derivative(1, -1.0).unwrap(), 0.0);
        assert_eq!(V.eval_derivative(2, 1.0).unwrap(), 2.0);
        assert_eq!(V.eval_derivative(0, 0.0).unwrap(), 0.0);
        assert_eq!(V.d2(-1.0), 2.0);
        assert_eq!(V.d2(0.0), -1.0);
        assert_eq!(V.d1(1.0), 0.0);
    }

    #[test]
    fn order_out_of_range() {
        assert!(matches!(
            V.eval_derivative(5, 0.3),
            Err(Error::InvalidArgument(_))
        ));
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences(x in -3.0f64..3.0, k in 0usize..4) {
            let h = 1e-4;
            let fd = (V.eval_derivative(k, x + h).unwrap() - V.eval_derivative(k, x - h).unwrap()) / (2.0 * h);
            let exact = V.eval_derivative(k + 1, x).unwrap();
            prop_assert!((fd - exact).abs() < 1e-6, "k={} x={} fd={} exact={}", k, x, fd, exact);
        }

        #[test]
        fn symmetry(x in -5.0f64..5.0) {
            prop_assert_eq!(V.value(-x), V.value(x));
            prop_assert_eq!(V.d1(-x), -V.d1(x));
        }
    }
}
