#![allow(dead_code)]

use stochopt::ode::{rk4, GridSolution, OdeSystem};

/// RK4 refined until its own error estimate is well below the comparison tolerance.
pub fn oracle<S: OdeSystem>(sys: &S) -> GridSolution {
    let mut n = 1024;
    loop {
        let grid = rk4(sys, n).unwrap();
        if grid.error_estimate < 1e-10 || n >= 1 << 20 {
            return grid;
        }
        n *= 2;
    }
}

/// Midpoints of `n` equal cells on `[lo, hi]`.
pub fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

/// Root of a sign change of `f` on `[lo, hi]` by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let flo = f(lo);
    if flo.signum() == f(hi).signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
