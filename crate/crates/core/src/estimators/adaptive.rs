//! Plug-in estimation of the noise level and the background signal.
//!
//! Observations live on the grid `sigma^2 * N`, so the grid step (and hence
//! `sigma`) is recoverable as the greatest common divisor of the positive
//! entries; the background is recoverable as the mean of an auxiliary
//! background-only sample.

use crate::error::{Error, Result};
use crate::model::{ColMatrix, ObservationMatrix};

/// Estimated grid step `sigma^2` and the implied `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEstimate {
    pub sigma_sq: f64,
    pub sigma: f64,
}

/// Euclidean GCD with an absolute tolerance: remainders within `tol` of 0 or
/// of the divisor are treated as exact.
fn float_gcd(mut a: f64, mut b: f64, tol: f64) -> f64 {
    if a < b {
        std::mem::swap(&mut a, &mut b);
    }
    loop {
        if b <= tol {
            return a;
        }
        let mut r = a % b;
        if r <= tol || b - r <= tol {
            r = 0.0;
        }
        a = b;
        b = r;
    }
}

/// Grid step of a set of observation entries: the tolerant GCD of all
/// strictly positive values (tolerance `1e-9 * max entry`).
///
/// With a single distinct positive value `v` the estimate is `v` itself, an
/// overestimate whenever the underlying count is > 1; it becomes consistent
/// as the number of entries grows.
pub fn estimate_sigma_entries(entries: &[f64]) -> Result<GridEstimate> {
    let mut max = 0.0f64;
    for &v in entries {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "observation entries must be finite and nonnegative, got {v}"
            )));
        }
        max = max.max(v);
    }
    if max == 0.0 {
        return Err(Error::AllZero);
    }
    let tol = 1e-9 * max;
    let mut g = 0.0f64;
    for &v in entries {
        if v > 0.0 {
            g = if g == 0.0 { v } else { float_gcd(g, v, tol) };
        }
    }
    Ok(GridEstimate {
        sigma_sq: g,
        sigma: g.sqrt(),
    })
}

/// [`estimate_sigma_entries`] over a whole observation matrix. The `sigma`
/// recorded in the matrix is deliberately ignored.
pub fn estimate_sigma(x: &ObservationMatrix) -> Result<GridEstimate> {
    estimate_sigma_entries(x.matrix().entries())
}

/// Coordinatewise mean of an auxiliary sample (columns are draws).
pub fn estimate_background(aux: &ColMatrix) -> Result<Vec<f64>> {
    if aux.cols() == 0 {
        return Err(Error::EmptySample);
    }
    let mut out = vec![0.0f64; aux.rows()];
    for j in 0..aux.cols() {
        for (o, &v) in out.iter_mut().zip(aux.col(j)) {
            *o += v;
        }
    }
    let inv = 1.0 / aux.cols() as f64;
    for o in &mut out {
        *o *= inv;
    }
    Ok(out)
}
