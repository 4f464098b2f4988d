//! Problem instances: sparse scaled-Poisson intensity families, their
//! validation, and exact seeded observation sampling.
//!
//! Column indices in the public types are 1-based (matching the JSON file
//! format); the raw [`ColMatrix`] buffer is 0-based.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{poisson, stream_rng};

/// Relative tolerance for the sigma^2-grid membership check. Absorbs the
/// round-off of the `sigma^2 * count` multiplication.
pub const GRID_REL_TOL: f64 = 1e-9;

/// Column-major `rows x cols` buffer of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        ColMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Build from equally long column vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptySample);
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch(
                "columns have unequal lengths".into(),
            ));
        }
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            data.extend_from_slice(c);
        }
        Ok(ColMatrix {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// 0-based column view.
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// 0-based entry access.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    /// All entries in column-major order.
    pub fn entries(&self) -> &[f64] {
        &self.data
    }
}

/// Sorted set of 1-based column indices within `[1, n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(BTreeSet<usize>);

impl SupportSet {
    /// Validates every index against `[1, n]`; duplicates coalesce.
    pub fn new(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        for &i in &set {
            if i == 0 || i > n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
        }
        Ok(SupportSet(set))
    }

    pub fn empty() -> Self {
        SupportSet(BTreeSet::new())
    }

    pub fn full(n: usize) -> Self {
        SupportSet((1..=n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.iter().next_back().copied()
    }

    /// |self symmetric-difference other|
    pub fn sym_diff_count(&self, other: &SupportSet) -> usize {
        self.0.symmetric_difference(&other.0).count()
    }
}

/// A problem instance: dimensions, noise level, background, signal columns
/// and the intensity cap.
///
/// Serializes to/from JSON as
/// `{"n":…, "p":…, "sigma":…, "mu0":[…], "mu_inf":…, "signals":{"<i>":[…]}}`
/// with 1-based column indices as keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub mu0: Vec<f64>,
    pub mu_inf: f64,
    /// 1-based column index -> intensity vector; the key set is the support.
    #[serde(default)]
    pub signals: BTreeMap<usize, Vec<f64>>,
}

impl ModelSpec {
    /// Background-only instance.
    pub fn background_only(n: usize, p: usize, sigma: f64, mu0: Vec<f64>, mu_inf: f64) -> Self {
        ModelSpec {
            n,
            p,
            sigma,
            mu0,
            mu_inf,
            signals: BTreeMap::new(),
        }
    }

    pub fn mu0_max(&self) -> f64 {
        self.mu0.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    /// The sparsity set S (keys of `signals`).
    pub fn support(&self) -> SupportSet {
        SupportSet(self.signals.keys().copied().collect())
    }

    pub fn sparsity(&self) -> usize {
        self.signals.len()
    }

    /// Check every instance invariant; returns `&self` unchanged on success.
    pub fn validate(&self) -> Result<&Self> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidInput("n and p must be >= 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        if self.mu0.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "mu0 has length {}, expected p = {}",
                self.mu0.len(),
                self.p
            )));
        }
        if !(self.mu_inf > 0.0 && self.mu_inf.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "mu_inf must be positive and finite, got {}",
                self.mu_inf
            )));
        }
        if self.mu_inf < self.mu0_max() {
            return Err(Error::EmptyClass {
                mu_inf: self.mu_inf,
                mu0_max: self.mu0_max(),
            });
        }
        for (j, &v) in self.mu0.iter().enumerate() {
            if !(v > 0.0) || v > self.mu_inf {
                return Err(Error::BadIntensity {
                    context: format!("mu0[{}]", j + 1),
                    value: v,
                    mu_inf: self.mu_inf,
                });
            }
        }
        if self.signals.len() > self.n {
            return Err(Error::BadSparsity(format!(
                "{} signal columns exceed n = {}",
                self.signals.len(),
                self.n
            )));
        }
        for (&i, col) in &self.signals {
            if i == 0 || i > self.n {
                return Err(Error::BadSparsity(format!(
                    "signal column index {i} outside [1, {}]",
                    self.n
                )));
            }
            if col.len() != self.p {
                return Err(Error::DimensionMismatch(format!(
                    "signal column {i} has length {}, expected p = {}",
                    col.len(),
                    self.p
                )));
            }
            for (j, &v) in col.iter().enumerate() {
                if !(v > 0.0) || v > self.mu_inf {
                    return Err(Error::BadIntensity {
                        context: format!("signal column {i}, row {}", j + 1),
                        value: v,
                        mu_inf: self.mu_inf,
                    });
                }
            }
            if col == &self.mu0 {
                return Err(Error::DegenerateSignal { index: i });
            }
        }
        Ok(self)
    }

    /// The p x n intensity matrix: column i is `signals[i]` for i in S, the
    /// background otherwise.
    pub fn intensity_matrix(&self) -> IntensityMatrix {
        let mut m = ColMatrix::filled(self.p, self.n, 0.0);
        for j in 0..self.n {
            let col = self.signals.get(&(j + 1)).unwrap_or(&self.mu0);
            m.col_mut(j).copy_from_slice(col);
        }
        IntensityMatrix { m }
    }
}

/// A p x n matrix of strictly positive intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMatrix {
    m: ColMatrix,
}

impl IntensityMatrix {
    pub fn from_matrix(m: ColMatrix) -> Result<Self> {
        if let Some(&bad) = m.entries().iter().find(|v| !(**v > 0.0)) {
            return Err(Error::BadIntensity {
                context: "intensity matrix".into(),
                value: bad,
                mu_inf: f64::INFINITY,
            });
        }
        Ok(IntensityMatrix { m })
    }

    pub fn p(&self) -> usize {
        self.m.rows()
    }

    pub fn n(&self) -> usize {
        self.m.cols()
    }

    /// 0-based column view.
    pub fn col(&self, j: usize) -> &[f64] {
        self.m.col(j)
    }

    pub fn matrix(&self) -> &ColMatrix {
        &self.m
    }

    /// Largest entry.
    pub fn max_entry(&self) -> f64 {
        self.m.entries().iter().fold(f64::MIN, |a, &b| a.max(b))
    }
}

/// The functional `L(M) = sum_i (mu_i - mu_0)`; equals the sum over the
/// signal columns alone since background columns cancel.
pub fn linear_functional(m: &IntensityMatrix, mu0: &[f64]) -> Result<Vec<f64>> {
    if mu0.len() != m.p() {
        return Err(Error::DimensionMismatch(format!(
            "mu0 has length {}, expected p = {}",
            mu0.len(),
            m.p()
        )));
    }
    let mut out = vec![0.0f64; m.p()];
    for j in 0..m.n() {
        let col = m.col(j);
        for (o, (&x, &b)) in out.iter_mut().zip(col.iter().zip(mu0)) {
            *o += x - b;
        }
    }
    Ok(out)
}

/// A p x n observation matrix with entries on the grid `sigma^2 * N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    m: ColMatrix,
    sigma: f64,
}

impl ObservationMatrix {
    /// Wrap an existing matrix, checking the grid invariant: every entry
    /// divided by sigma^2 must be a nonnegative integer within
    /// [`GRID_REL_TOL`] relative tolerance.
    pub fn from_parts(m: ColMatrix, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        let s2 = sigma * sigma;
        for &v in m.entries() {
            if v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "observation entry {v} is negative"
                )));
            }
            let k = v / s2;
            if (k - k.round()).abs() > GRID_REL_TOL * k.abs().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "entry {v} is not on the sigma^2 grid (sigma = {sigma})"
                )));
            }
        }
        Ok(ObservationMatrix { m, sigma })
    }

    pub fn p(&self) -> usize {
        self.m.rows()
    }

    pub fn n(&self) -> usize {
        self.m.cols()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// 0-based column view.
    pub fn col(&self, j: usize) -> &[f64] {
        self.m.col(j)
    }

    pub fn matrix(&self) -> &ColMatrix {
        &self.m
    }
}

/// Draw one observation matrix: entry `(j, i) = sigma^2 * K` with
/// `K ~ Poisson(mu_ij / sigma^2)`, all entries independent.
///
/// Column `i` reads from ChaCha stream `(seed, i)`, so the output is a pure
/// function of `(m, sigma, seed)` no matter how callers parallelize, and
/// distinct `(seed, column)` pairs never share a stream.
pub fn sample_observations(m: &IntensityMatrix, sigma: f64, seed: u64) -> ObservationMatrix {
    assert!(sigma > 0.0 && sigma.is_finite());
    let s2 = sigma * sigma;
    let mut out = ColMatrix::filled(m.p(), m.n(), 0.0);
    for j in 0..m.n() {
        let mut rng = stream_rng(seed, j as u64);
        let src = m.col(j);
        let dst = out.col_mut(j);
        for (d, &mu) in dst.iter_mut().zip(src) {
            *d = s2 * poisson(&mut rng, mu / s2) as f64;
        }
    }
    ObservationMatrix { m: out, sigma }
}

/// Draw `count` background-only vectors `sigma^2 * Poisson(mu0 / sigma^2)`
/// as a p x count matrix (the auxiliary sample of the plug-in estimators).
pub fn sample_background(mu0: &[f64], sigma: f64, count: usize, seed: u64) -> ObservationMatrix {
    let mut cols = ColMatrix::filled(mu0.len(), count, 0.0);
    let s2 = sigma * sigma;
    for j in 0..count {
        let mut rng = stream_rng(seed, j as u64);
        let dst = cols.col_mut(j);
        for (d, &mu) in dst.iter_mut().zip(mu0) {
            *d = s2 * poisson(&mut rng, mu / s2) as f64;
        }
    }
    ObservationMatrix { m: cols, sigma }
}
