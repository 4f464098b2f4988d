//! Monte Carlo validation of the tail inequality behind the support test
//! and of the Poisson fourth-moment identity.
//!
//! For independent `eta_j ~ Poisson(nu_j)` the centered quadratic statistic
//! `||eta - nu||_2^2 - ||eta||_1` has mean zero, and its upper tail at
//! `nu_inf sqrt(p) u` is bounded by `(2p+1) e^{-c u^{2/3}}` with
//! `c = 12^{1/3}/6 ≈ 0.3816`, for `u` in the admissible window
//! `[nu_inf^{-3/2}, 0.9 nu_inf^{3/2}]`. The lab estimates the tail with a
//! binomial confidence interval and compares the interval's upper end to the
//! analytic bound; vacuous regimes (bound > 1) are reported as-is.

use rayon::prelude::*;

use crate::numeric::{binomial_ci95, mean_and_se};
use crate::rng::{derive_seed, poisson, stream_rng};

/// The tail-bound exponent constant `12^{1/3} / 6`.
pub fn lemma1_constant() -> f64 {
    12f64.cbrt() / 6.0
}

/// Analytic tail bound `(2p + 1) e^{-c u^{2/3}}`.
pub fn lemma1_bound(p: usize, u: f64) -> f64 {
    (2.0 * p as f64 + 1.0) * (-lemma1_constant() * u.powf(2.0 / 3.0)).exp()
}

/// Whether `u` lies in the admissible window `nu_inf^{-3/2} <= u <= 0.9 nu_inf^{3/2}`.
pub fn lemma1_in_range(nu_inf: f64, u: f64) -> bool {
    nu_inf.powf(-1.5) <= u && u <= 0.9 * nu_inf.powf(1.5)
}

/// One grid row of a tail check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub u: f64,
    pub in_range: bool,
    pub emp_freq: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    /// 95% CI upper end at or below the analytic bound.
    pub pass: bool,
}

/// Tail check over a grid of thresholds, sharing one set of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub nu: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<TailRow>,
}

/// Draw `reps` independent vectors `eta ~ Poisson(nu)` (stream per
/// replication) and return the statistic `||eta - nu||^2 - ||eta||_1` per
/// replication, in replication order.
fn simulate_stats(nu: &[f64], reps: usize, seed: u64) -> Vec<f64> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let mut stat = 0.0f64;
            for &nu_j in nu {
                let eta = poisson(&mut rng, nu_j) as f64;
                stat += (eta - nu_j) * (eta - nu_j) - eta;
            }
            stat
        })
        .collect()
}

fn row_from_stats(nu: &[f64], stats: &[f64], u: f64) -> TailRow {
    let nu_inf = nu.iter().fold(0.0f64, |a, &b| a.max(b));
    let p = nu.len();
    let threshold = nu_inf * (p as f64).sqrt() * u;
    let hits = stats.iter().filter(|&&s| s >= threshold).count();
    let reps = stats.len();
    let emp_freq = hits as f64 / reps as f64;
    let (ci_low, ci_high) = binomial_ci95(hits, reps);
    let bound = lemma1_bound(p, u);
    TailRow {
        u,
        in_range: lemma1_in_range(nu_inf, u),
        emp_freq,
        ci_low,
        ci_high,
        bound,
        pass: ci_high <= bound,
    }
}

/// Tail estimate at a single threshold `u`.
pub fn lemma1_tail_mc(nu: &[f64], u: f64, reps: usize, seed: u64) -> TailRow {
    let stats = simulate_stats(nu, reps, seed);
    row_from_stats(nu, &stats, u)
}

/// Tail estimates over a `u` grid, computed from one shared sample (each row
/// equals `lemma1_tail_mc(nu, u, reps, seed)`).
pub fn lemma1_tail_report(nu: &[f64], u_grid: &[f64], reps: usize, seed: u64) -> TailReport {
    let stats = simulate_stats(nu, reps, seed);
    let rows = u_grid
        .iter()
        .map(|&u| row_from_stats(nu, &stats, u))
        .collect();
    TailReport {
        nu: nu.to_vec(),
        replications: reps,
        seed,
        rows,
    }
}

/// Mean and standard error of the centered statistic (it is exactly
/// mean-zero: `E (eta_j - nu_j)^2 = nu_j = E eta_j`).
pub fn centered_stat_mc(nu: &[f64], reps: usize, seed: u64) -> (f64, f64) {
    let stats = simulate_stats(nu, reps, seed);
    mean_and_se(&stats)
}

/// Result of an empirical fourth-moment check for
/// `xi = sigma (K - mu/sigma^2)`, `K ~ Poisson(mu/sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourthMomentCheck {
    /// Monte Carlo mean of `xi^4`.
    pub empirical: f64,
    /// Exact value `sigma^2 mu + 3 mu^2`.
    pub exact: f64,
    /// Standard error of the Monte Carlo mean, from the empirical eighth
    /// moment.
    pub se: f64,
    /// Whether `sigma^2 <= 0.9^{1/3} mu`, the regime in which the crude cap
    /// below is claimed.
    pub cap_applicable: bool,
    /// `exact <= (2 mu)^2` (meaningful when `cap_applicable`).
    pub cap_ok: bool,
}

/// Estimate `E[xi^4]` by Monte Carlo and compare with the closed form.
pub fn fourth_moment_check(mu: f64, sigma: f64, reps: usize, seed: u64) -> FourthMomentCheck {
    assert!(mu > 0.0 && sigma > 0.0);
    let rate = mu / (sigma * sigma);
    let fourths: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let xi = sigma * (poisson(&mut rng, rate) as f64 - rate);
            xi.powi(4)
        })
        .collect();
    let n = reps as f64;
    let empirical = fourths.iter().sum::<f64>() / n;
    let eighth = fourths.iter().map(|v| v * v).sum::<f64>() / n;
    let se = ((eighth - empirical * empirical).max(0.0) / n).sqrt();
    let exact = sigma * sigma * mu + 3.0 * mu * mu;
    let cap_applicable = sigma * sigma <= 0.9f64.cbrt() * mu;
    FourthMomentCheck {
        empirical,
        exact,
        se,
        cap_applicable,
        cap_ok: exact <= 4.0 * mu * mu,
    }
}

/// Seed offset helper for callers that need several independent checks.
pub fn offset_seed(seed: u64, tag: u64) -> u64 {
    derive_seed(seed, tag)
}
