//! Constructive lower-bound instances and their numerical certificates.
//!
//! Two constructions are provided:
//!
//! * a **two-prior instance**: a Dirac prior on the all-background matrix
//!   against a Bernoulli-mixture prior that lifts the first coordinate of a
//!   random small set of columns. The data laws stay KL-close (checked
//!   exactly via the truncated series) while the functionals separate by
//!   `s sigma^2 eps / 2 = 2v + 4 sqrt(M)`;
//! * a **packing instance**: one intensity matrix per subset of a
//!   Varshamov-Gilbert code, pairwise well separated with explicitly
//!   computable KL divergences.
//!
//! The minimax infimum itself is not computable; what is checkable — KL
//! levels, separation identities, class membership, prior mass escaping the
//! class — is computed here and certified by brute force where possible.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{kl_mixture_bound, kl_mixture_exact, kl_packing_instance};
use crate::error::{Error, Result};
use crate::model::{linear_functional, ColMatrix, IntensityMatrix, ModelSpec};
use crate::numeric::binomial_tail_gt;
use crate::rng::stream_rng;

/// Default candidate budget for the randomized packing search.
pub const PACKING_BUDGET: usize = 1_000_000;

/// Mixture-prior lower-bound instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPriorInstance {
    pub n: usize,
    pub s: usize,
    pub sigma: f64,
    /// Largest background coordinate (the lifted one).
    pub mu0_max: f64,
    /// Lift size: `eps^2 = (mu0_max / sigma^2) ln(1 + n / 2s^2)`.
    pub eps: f64,
    /// Column modification probability `s / 2n`.
    pub mixture_weight: f64,
    /// `v = s sigma^2 eps / 8`.
    pub v: f64,
    /// Variance proxy `M = 2^{-8} s^2 sigma^4 eps^2`.
    pub m_var: f64,
    /// Closed-form KL bound (equals 1/8 at this `eps`).
    pub kl_bound: f64,
    /// Exact mixture KL via truncated series.
    pub kl_exact: f64,
    /// `||E_pi1 L - E_pi0 L|| = s sigma^2 eps / 2`.
    pub separation: f64,
    /// First coordinate of the mean shift (all other coordinates are 0).
    pub mean_shift_coord1: f64,
    /// `s >= 128`, the regime the construction is calibrated for.
    pub condition_ok: bool,
}

impl TwoPriorInstance {
    /// The functional's mean shift under the mixture prior, as a length-`p`
    /// vector.
    pub fn mean_shift(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        if p > 0 {
            out[0] = self.mean_shift_coord1;
        }
        out
    }

    /// Exact probability that a mixture draw leaves the sparsity class,
    /// `P(Binomial(n, s/2n) > s)`.
    pub fn class_escape_exact(&self) -> f64 {
        binomial_tail_gt(self.n as u64, self.mixture_weight, self.s as u64)
    }

    /// The nominal tail level `e^{-3s/5}` quoted for the class-escape
    /// probability.
    pub fn class_escape_nominal(&self) -> f64 {
        (-3.0 * self.s as f64 / 5.0).exp()
    }
}

/// Build the two-prior instance. `s < 128` is flagged via `condition_ok`,
/// not rejected.
pub fn two_prior_instance(
    n: usize,
    s: usize,
    sigma: f64,
    mu0_max: f64,
) -> Result<TwoPriorInstance> {
    if n == 0 || s == 0 {
        return Err(Error::InvalidInput("n and s must be >= 1".into()));
    }
    if !(sigma > 0.0) || !(mu0_max > 0.0) {
        return Err(Error::InvalidInput(
            "sigma and mu0_max must be positive".into(),
        ));
    }
    let s2 = sigma * sigma;
    let sf = s as f64;
    let eps = (mu0_max / s2 * (1.0 + n as f64 / (2.0 * sf * sf)).ln()).sqrt();
    let v = sf * s2 * eps / 8.0;
    let m_var = sf * sf * s2 * s2 * eps * eps / 256.0;
    let separation = sf * s2 * eps / 2.0;
    let kl_bound = kl_mixture_bound(n, s, sigma, eps, mu0_max);
    let kl_exact = kl_mixture_exact(n, s, sigma, eps, mu0_max, 1e-12)?;
    Ok(TwoPriorInstance {
        n,
        s,
        sigma,
        mu0_max,
        eps,
        mixture_weight: sf / (2.0 * n as f64),
        v,
        m_var,
        kl_bound,
        kl_exact,
        separation,
        mean_shift_coord1: separation,
        condition_ok: s >= 128,
    })
}

/// Draw one intensity matrix from the mixture prior: every column
/// independently gets its first coordinate lifted by `sigma^2 eps` with
/// probability `s/2n`; all other rows stay at the background. Single seeded
/// stream, deterministic per seed.
pub fn sample_prior_pi1(
    instance: &TwoPriorInstance,
    n: usize,
    p: usize,
    mu0: &[f64],
    seed: u64,
) -> Result<IntensityMatrix> {
    if mu0.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "mu0 has length {}, expected p = {}",
            mu0.len(),
            p
        )));
    }
    let lift = instance.sigma * instance.sigma * instance.eps;
    let mut m = ColMatrix::filled(p, n, 0.0);
    let mut rng = stream_rng(seed, 0);
    for j in 0..n {
        let col = m.col_mut(j);
        col.copy_from_slice(mu0);
        if rng.random::<f64>() < instance.mixture_weight {
            col[0] += lift;
        }
    }
    IntensityMatrix::from_matrix(m)
}

/// A family of subsets of `[p]` (1-based) with pairwise symmetric difference
/// at least `ceil(p/8)`, first subset empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackingCode {
    pub p: usize,
    pub subsets: Vec<BTreeSet<usize>>,
    /// Recomputed by brute force over all pairs.
    pub min_sym_diff: usize,
    /// Number of subsets held (= `floor(e^{p/8}) + 1` on success).
    pub m: usize,
}

/// Number of subsets the construction targets: `floor(e^{p/8}) + 1`.
pub fn packing_target(p: usize) -> usize {
    (p as f64 / 8.0).exp().floor() as usize + 1
}

fn mask_sym_diff(a: &[u64], b: &[u64]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum()
}

/// Brute-force minimum pairwise symmetric difference (certificate pass,
/// independent of how the subsets were found).
pub fn verify_min_sym_diff(p: usize, subsets: &[BTreeSet<usize>]) -> usize {
    let masks: Vec<Vec<u64>> = subsets.iter().map(|s| to_mask(p, s)).collect();
    let mut min = usize::MAX;
    for i in 0..masks.len() {
        for j in (i + 1)..masks.len() {
            min = min.min(mask_sym_diff(&masks[i], &masks[j]));
        }
    }
    min
}

fn to_mask(p: usize, s: &BTreeSet<usize>) -> Vec<u64> {
    let mut mask = vec![0u64; p.div_ceil(64)];
    for &e in s {
        mask[(e - 1) / 64] |= 1u64 << ((e - 1) % 64);
    }
    mask
}

fn from_mask(p: usize, mask: &[u64]) -> BTreeSet<usize> {
    (1..=p)
        .filter(|e| mask[(e - 1) / 64] >> ((e - 1) % 64) & 1 == 1)
        .collect()
}

/// Randomized-greedy Varshamov-Gilbert packing: sample uniform subsets and
/// keep those at symmetric difference >= `ceil(p/8)` from everything kept so
/// far, starting from the empty set, until `floor(e^{p/8}) + 1` subsets are
/// held or the candidate budget runs out.
pub fn varshamov_gilbert_packing(p: usize, seed: u64) -> Result<PackingCode> {
    varshamov_gilbert_packing_with_budget(p, seed, PACKING_BUDGET)
}

/// [`varshamov_gilbert_packing`] with an explicit candidate budget.
pub fn varshamov_gilbert_packing_with_budget(
    p: usize,
    seed: u64,
    budget: usize,
) -> Result<PackingCode> {
    if p == 0 {
        return Err(Error::InvalidInput("p must be >= 1".into()));
    }
    let target = packing_target(p);
    let min_d = p.div_ceil(8);
    let words = p.div_ceil(64);
    let top_mask = if p.is_multiple_of(64) {
        u64::MAX
    } else {
        (1u64 << (p % 64)) - 1
    };
    let mut rng = stream_rng(seed, 0);
    let mut kept: Vec<Vec<u64>> = vec![vec![0u64; words]];
    let mut tried = 0usize;
    while kept.len() < target {
        if tried >= budget {
            return Err(Error::PackingBudgetExceeded {
                tried,
                achieved: kept.len(),
                target,
            });
        }
        tried += 1;
        let mut cand: Vec<u64> = (0..words).map(|_| rng.random::<u64>()).collect();
        if let Some(last) = cand.last_mut() {
            *last &= top_mask;
        }
        if kept.iter().all(|k| mask_sym_diff(k, &cand) >= min_d) {
            kept.push(cand);
        }
    }
    let subsets: Vec<BTreeSet<usize>> = kept.iter().map(|m| from_mask(p, m)).collect();
    let min_sym_diff = verify_min_sym_diff(p, &subsets);
    let m = subsets.len();
    Ok(PackingCode {
        p,
        subsets,
        min_sym_diff,
        m,
    })
}

/// Separation record for one pair of packing matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSeparation {
    /// Subset indices into `code.subsets`, `i < j`.
    pub i: usize,
    pub j: usize,
    pub sym_diff: usize,
    /// `||L(M_i) - L(M_j)||^2 = s^2 |T_i ^ T_j| eps^2 mu_inf^2`.
    pub value: f64,
}

/// Packing lower-bound instance: one intensity matrix per code subset.
#[derive(Debug, Clone)]
pub struct PackingInstance {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub sigma: f64,
    pub mu0: Vec<f64>,
    pub mu_inf: f64,
    /// `eps^2 = 2^{-7} sigma^2 / (s mu_inf)`.
    pub eps: f64,
    pub code: PackingCode,
    pub matrices: Vec<IntensityMatrix>,
    /// `KL(P_{M_T} || P_{M_0})` per subset, in code order.
    pub kl_values: Vec<f64>,
    pub separations: Vec<PairSeparation>,
}

impl PackingInstance {
    /// `s^2 p eps^2 mu_inf^2 / 8`, the level every pairwise separation must
    /// reach.
    pub fn separation_threshold(&self) -> f64 {
        let sf = self.s as f64;
        sf * sf * self.p as f64 * self.eps * self.eps * self.mu_inf * self.mu_inf / 8.0
    }

    /// `s p eps^2 mu_inf / sigma^2`, the cap dominating every KL value.
    pub fn kl_cap(&self) -> f64 {
        self.s as f64 * self.p as f64 * self.eps * self.eps * self.mu_inf
            / (self.sigma * self.sigma)
    }

    pub fn min_separation(&self) -> f64 {
        self.separations
            .iter()
            .map(|s| s.value)
            .fold(f64::INFINITY, f64::min)
    }

    /// Recompute `||L(M_i) - L(M_j)||^2` from the explicit matrices
    /// (independent of the closed form stored in `separations`).
    pub fn separation_from_matrices(&self, i: usize, j: usize) -> Result<f64> {
        let li = linear_functional(&self.matrices[i], &self.mu0)?;
        let lj = linear_functional(&self.matrices[j], &self.mu0)?;
        Ok(li.iter().zip(&lj).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

/// Build the packing instance for the class `(n, p, s, mu0, mu_inf)`.
pub fn packing_instance(
    n: usize,
    p: usize,
    s: usize,
    sigma: f64,
    mu0: &[f64],
    mu_inf: f64,
    seed: u64,
) -> Result<PackingInstance> {
    if p < 16 {
        return Err(Error::InvalidInput(format!(
            "packing instance requires p >= 16, got {p}"
        )));
    }
    if s == 0 {
        return Err(Error::InvalidInput("s must be >= 1".into()));
    }
    if s > n {
        return Err(Error::BadSparsity(format!("s = {s} exceeds n = {n}")));
    }
    if mu0.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "mu0 has length {}, expected p = {}",
            mu0.len(),
            p
        )));
    }
    let mu0_max = mu0.iter().fold(0.0f64, |a, &b| a.max(b));
    if mu_inf < mu0_max {
        return Err(Error::EmptyClass { mu_inf, mu0_max });
    }
    let eps = (sigma * sigma / (128.0 * s as f64 * mu_inf)).sqrt();
    if !(eps < 1.0) || mu_inf * (1.0 - eps) <= 0.0 {
        return Err(Error::BadEps(eps));
    }
    let code = varshamov_gilbert_packing(p, seed)?;

    let mut matrices = Vec::with_capacity(code.m);
    let mut kl_values = Vec::with_capacity(code.m);
    for t in &code.subsets {
        let mut m = ColMatrix::filled(p, n, 0.0);
        for j in 0..n {
            let col = m.col_mut(j);
            if j < s {
                for (r, c) in col.iter_mut().enumerate() {
                    *c = if t.contains(&(r + 1)) {
                        mu_inf * (1.0 - eps)
                    } else {
                        mu_inf
                    };
                }
            } else {
                col.copy_from_slice(mu0);
            }
        }
        // class membership through the model validator: register exactly the
        // columns that differ from the background
        let signals = (0..s)
            .filter(|&j| m.col(j) != mu0)
            .map(|j| (j + 1, m.col(j).to_vec()))
            .collect();
        ModelSpec {
            n,
            p,
            sigma,
            mu0: mu0.to_vec(),
            mu_inf,
            signals,
        }
        .validate()?;
        matrices.push(IntensityMatrix::from_matrix(m)?);
        kl_values.push(kl_packing_instance(t.len(), s, eps, mu_inf, sigma)?);
    }

    let sf = s as f64;
    let mut separations = Vec::new();
    let threshold = sf * sf * p as f64 * eps * eps * mu_inf * mu_inf / 8.0;
    for i in 0..code.m {
        for j in (i + 1)..code.m {
            let d = code.subsets[i]
                .symmetric_difference(&code.subsets[j])
                .count();
            let value = sf * sf * d as f64 * eps * eps * mu_inf * mu_inf;
            if value < threshold {
                return Err(Error::InvalidInput(format!(
                    "pair ({i}, {j}) separates by {value}, below threshold {threshold}"
                )));
            }
            separations.push(PairSeparation {
                i,
                j,
                sym_diff: d,
                value,
            });
        }
    }

    Ok(PackingInstance {
        n,
        p,
        s,
        sigma,
        mu0: mu0.to_vec(),
        mu_inf,
        eps,
        code,
        matrices,
        kl_values,
        separations,
    })
}
