//! Estimators of the summed excess intensity `L(M)`.
//!
//! Three base strategies — naive (sum everything), oracle (sum the true
//! signal columns), and group hard thresholding (sum the columns whose
//! distance to the background survives a per-column threshold) — plus
//! plug-in variants for unknown `sigma` / `mu_0` ([`estimate_sigma`],
//! [`estimate_background`]).
//!
//! The strategies live behind the [`Estimator`] trait and are selected by
//! name at runtime ([`EstimatorSpec`], [`registry`]); the free functions in
//! this module are the underlying operations.

mod adaptive;
mod registry;

pub use adaptive::{estimate_background, estimate_sigma, estimate_sigma_entries, GridEstimate};
pub use registry::{
    registry, EstimationInput, Estimator, EstimatorSpec, GhtEstimator, GhtPluginEstimator,
    NaiveEstimator, OracleEstimator,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ObservationMatrix, SupportSet};

/// The scale constant of the reference threshold; [`default_lambda`] uses it
/// verbatim, experiments may override it via `lambda_scale`.
pub const DEFAULT_LAMBDA_SCALE: f64 = 40.0;

/// An estimate of `L(M)` with the support and threshold metadata that
/// produced it.
///
/// JSON form: `{"value":[…], "support":[…], "lambda":…}` (`support` and
/// `lambda` are `null` for strategies that do not select a support).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEstimate {
    pub value: Vec<f64>,
    pub support: Option<SupportSet>,
    #[serde(rename = "lambda")]
    pub lambda_used: Option<f64>,
    /// Per-column thresholds `tau_i = sigma^2 (||X_i||_1 + lambda)`;
    /// populated by the thresholding estimator, not serialized.
    #[serde(skip)]
    pub tau: Option<Vec<f64>>,
}

/// `sum_{i in support} (X_i - mu_0)`, accumulated coordinate-wise in
/// increasing column order. Every estimator in this module reports values
/// reproducible bit-for-bit through this function.
pub fn sum_centered_columns(
    x: &ObservationMatrix,
    mu0: &[f64],
    support: &SupportSet,
) -> Result<Vec<f64>> {
    if mu0.len() != x.p() {
        return Err(Error::DimensionMismatch(format!(
            "mu0 has length {}, expected p = {}",
            mu0.len(),
            x.p()
        )));
    }
    if let Some(max) = support.max() {
        if max > x.n() {
            return Err(Error::IndexOutOfRange {
                index: max,
                n: x.n(),
            });
        }
    }
    let mut out = vec![0.0f64; x.p()];
    for i in support.iter() {
        let col = x.col(i - 1);
        for (o, (&v, &b)) in out.iter_mut().zip(col.iter().zip(mu0)) {
            *o += v - b;
        }
    }
    Ok(out)
}

/// The estimator that ignores sparsity: `sum_{i in [n]} (X_i - mu_0)`.
pub fn naive_estimate(x: &ObservationMatrix, mu0: &[f64]) -> Result<FunctionalEstimate> {
    let value = sum_centered_columns(x, mu0, &SupportSet::full(x.n()))?;
    Ok(FunctionalEstimate {
        value,
        support: None,
        lambda_used: None,
        tau: None,
    })
}

/// The infeasible estimator that sums over a given support.
pub fn oracle_estimate(
    x: &ObservationMatrix,
    mu0: &[f64],
    support: &SupportSet,
) -> Result<FunctionalEstimate> {
    let value = sum_centered_columns(x, mu0, support)?;
    Ok(FunctionalEstimate {
        value,
        support: Some(support.clone()),
        lambda_used: None,
        tau: None,
    })
}

/// Threshold `lambda = scale * ||mu0||_inf * sqrt(p) * ln(2np)^{3/2}`.
pub fn threshold_lambda(n: usize, p: usize, mu0: &[f64], scale: f64) -> f64 {
    let mu0_max = mu0.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    scale * mu0_max * (p as f64).sqrt() * (2.0 * n as f64 * p as f64).ln().powf(1.5)
}

/// [`threshold_lambda`] at the reference scale 40.
pub fn default_lambda(n: usize, p: usize, mu0: &[f64]) -> f64 {
    threshold_lambda(n, p, mu0, DEFAULT_LAMBDA_SCALE)
}

/// Selected support: columns with
/// `||X_i - mu_0||_2^2 >= sigma^2 (||X_i||_1 + lambda)`.
///
/// Boundary equality is included. Single O(np) pass.
pub fn estimate_support(
    x: &ObservationMatrix,
    mu0: &[f64],
    sigma: f64,
    lambda: f64,
) -> Result<SupportSet> {
    if mu0.len() != x.p() {
        return Err(Error::DimensionMismatch(format!(
            "mu0 has length {}, expected p = {}",
            mu0.len(),
            x.p()
        )));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidInput(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let s2 = sigma * sigma;
    let mut kept = Vec::new();
    for j in 0..x.n() {
        let col = x.col(j);
        let mut dist2 = 0.0f64;
        let mut l1 = 0.0f64;
        for (&v, &b) in col.iter().zip(mu0) {
            dist2 += (v - b) * (v - b);
            l1 += v;
        }
        if dist2 >= s2 * (l1 + lambda) {
            kept.push(j + 1);
        }
    }
    SupportSet::new(kept, x.n())
}

/// Per-column thresholds `tau_i = sigma^2 (||X_i||_1 + lambda)`.
fn column_thresholds(x: &ObservationMatrix, sigma: f64, lambda: f64) -> Vec<f64> {
    let s2 = sigma * sigma;
    (0..x.n())
        .map(|j| s2 * (x.col(j).iter().sum::<f64>() + lambda))
        .collect()
}

/// Group hard thresholding: estimate the support, then sum the surviving
/// centered columns. `lambda = None` uses [`default_lambda`]. Total cost
/// O(np).
pub fn ght_estimate(
    x: &ObservationMatrix,
    mu0: &[f64],
    sigma: f64,
    lambda: Option<f64>,
) -> Result<FunctionalEstimate> {
    let lambda = lambda.unwrap_or_else(|| default_lambda(x.n(), x.p(), mu0));
    let support = estimate_support(x, mu0, sigma, lambda)?;
    let value = sum_centered_columns(x, mu0, &support)?;
    Ok(FunctionalEstimate {
        value,
        support: Some(support),
        lambda_used: Some(lambda),
        tau: Some(column_thresholds(x, sigma, lambda)),
    })
}
