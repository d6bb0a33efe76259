//! Fixed-step classical Runge-Kutta for small autonomous systems.

/// One RK4 step of `y' = f(y)` with (possibly negative) step `h`.
pub fn rk4_step<const D: usize, F>(f: &F, y: &[f64; D], h: f64) -> [f64; D]
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    let axpy = |a: &[f64; D], s: f64, k: &[f64; D]| {
        let mut out = *a;
        for i in 0..D {
            out[i] += s * k[i];
        }
        out
    };
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * h, &k1));
    let k3 = f(&axpy(y, 0.5 * h, &k2));
    let k4 = f(&axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..D {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}
