//! Seeded Monte Carlo risk experiments, parameter sweeps and CSV output.
//!
//! Replication `r` of an experiment with master seed `S` samples its
//! observation matrix with seed `derive_seed(S, r)`; the auxiliary sample of
//! the estimator in config slot `k` (when one is requested) uses
//! `derive_seed(derive_seed(S, r), 1 + k)`. Squared errors are collected in
//! replication order and reduced sequentially, so reports and CSV files are
//! byte-identical under any thread count.

mod csv;

pub use csv::{fmt_f64, CsvWriter, CSV_HEADER};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    ght_risk_bound, lower_bound_thm2, lower_bound_thm3, naive_risk_exact, oracle_risk_exact,
    RiskBound,
};
use crate::error::{Error, Result};
use crate::estimators::{EstimationInput, EstimatorSpec};
use crate::model::{
    linear_functional, sample_background, sample_observations, IntensityMatrix, ModelSpec,
};
use crate::numeric::mean_and_se;
use crate::rng::derive_seed;

/// One experiment: a model, a list of estimator strategies, a replication
/// count and a master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub estimators: Vec<EstimatorSpec>,
    pub reps: usize,
    pub seed: u64,
    /// Where `simulate` writes its CSV; the CLI `--out` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be >= 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidInput("estimator list is empty".into()));
        }
        Ok(())
    }
}

/// Monte Carlo result for one estimator within one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub name: String,
    pub lambda_scale: Option<f64>,
    /// Mean of `||L_hat - L(M)||^2` over replications.
    pub mse: f64,
    /// Standard error of that mean.
    pub se: f64,
    /// Mean `|S_hat \ S| + |S \ S_hat|` for support-producing strategies.
    pub support_err: Option<f64>,
}

/// Closed-form values attached to every report; recomputed per config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub oracle_exact: f64,
    pub naive_exact: f64,
    pub ght_bound: RiskBound,
    pub lower_thm2: RiskBound,
    pub lower_thm3: RiskBound,
}

/// Result of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub sigma: f64,
    pub mu_inf: f64,
    pub reps: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorReport>,
    pub bounds: BoundsReport,
}

fn bounds_for(model: &ModelSpec, m: &IntensityMatrix) -> Result<BoundsReport> {
    let support = model.support();
    Ok(BoundsReport {
        oracle_exact: oracle_risk_exact(m, &support, model.sigma)?,
        naive_exact: naive_risk_exact(m, model.sigma),
        ght_bound: ght_risk_bound(
            model.n,
            model.p,
            model.sparsity(),
            model.sigma,
            model.mu_inf,
        ),
        lower_thm2: lower_bound_thm2(model.n, model.sparsity(), model.sigma, model.mu0_max()),
        lower_thm3: lower_bound_thm3(model.sparsity(), model.p, model.sigma, model.mu_inf),
    })
}

/// Run one seeded Monte Carlo experiment.
///
/// For every replication: sample an observation matrix, apply every
/// configured strategy, and accumulate squared errors against the true
/// functional. Deterministic for a fixed config regardless of parallelism.
pub fn run_risk_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.validate()?;
    let model = &cfg.model;
    let m = model.intensity_matrix();
    let l_true = linear_functional(&m, &model.mu0)?;
    let support = model.support();
    let strategies: Vec<_> = cfg.estimators.iter().map(|s| s.build()).collect();

    // (squared error, support error) per estimator slot, per replication
    type RepOutcome = Vec<(f64, Option<f64>)>;
    let per_rep: Vec<Result<RepOutcome>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(cfg.seed, r as u64);
            let x = sample_observations(&m, model.sigma, rep_seed);
            strategies
                .iter()
                .enumerate()
                .map(|(slot, strategy)| {
                    let aux = match strategy.aux_columns() {
                        0 => None,
                        m_aux => Some(sample_background(
                            &model.mu0,
                            model.sigma,
                            m_aux,
                            derive_seed(rep_seed, 1 + slot as u64),
                        )),
                    };
                    let input = EstimationInput {
                        x: &x,
                        mu0: &model.mu0,
                        sigma: model.sigma,
                        true_support: Some(&support),
                        aux: aux.as_ref().map(|a| a.matrix()),
                    };
                    let out = strategy.estimate(&input)?;
                    let sq_err: f64 = out
                        .value
                        .iter()
                        .zip(&l_true)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    let supp_err = out
                        .support
                        .as_ref()
                        .map(|sh| sh.sym_diff_count(&support) as f64);
                    Ok((sq_err, supp_err))
                })
                .collect()
        })
        .collect();

    let mut sq_errs: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.reps); strategies.len()];
    let mut supp_errs: Vec<Vec<f64>> = vec![Vec::new(); strategies.len()];
    for rep in per_rep {
        for (slot, (sq, supp)) in rep?.into_iter().enumerate() {
            sq_errs[slot].push(sq);
            if let Some(v) = supp {
                supp_errs[slot].push(v);
            }
        }
    }

    let estimators = strategies
        .iter()
        .enumerate()
        .map(|(slot, strategy)| {
            let (mse, se) = mean_and_se(&sq_errs[slot]);
            let support_err = if supp_errs[slot].is_empty() {
                None
            } else {
                Some(supp_errs[slot].iter().sum::<f64>() / supp_errs[slot].len() as f64)
            };
            EstimatorReport {
                name: strategy.name().to_string(),
                lambda_scale: strategy.lambda_scale(),
                mse,
                se,
                support_err,
            }
        })
        .collect();

    Ok(RiskReport {
        n: model.n,
        p: model.p,
        s: model.sparsity(),
        sigma: model.sigma,
        mu_inf: model.mu_inf,
        reps: cfg.reps,
        seed: cfg.seed,
        estimators,
        bounds: bounds_for(model, &m)?,
    })
}

/// Run an experiment whose estimator list contains plug-in strategies,
/// ensuring the matching known-parameter strategy is present for
/// side-by-side reporting (one is appended when missing).
pub fn plugin_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    let mut cfg = cfg.clone();
    let plugin_scales: Vec<f64> = cfg
        .estimators
        .iter()
        .filter_map(|e| match e {
            EstimatorSpec::GhtPlugin { lambda_scale, .. } => Some(*lambda_scale),
            _ => None,
        })
        .collect();
    if plugin_scales.is_empty() {
        return Err(Error::InvalidInput(
            "plugin_experiment requires a ght_plugin estimator".into(),
        ));
    }
    for scale in plugin_scales {
        let has_twin = cfg
            .estimators
            .iter()
            .any(|e| matches!(e, EstimatorSpec::Ght { lambda_scale } if *lambda_scale == scale));
        if !has_twin {
            cfg.estimators.push(EstimatorSpec::Ght {
                lambda_scale: scale,
            });
        }
    }
    run_risk_experiment(&cfg)
}

/// Signal shape used when a sweep regenerates models across `(n, p, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    /// `mu_i = mu_0 + delta * 1_p` on the support.
    UniformLift,
    /// `mu_i = mu_0 + delta * e_1` on the support.
    Spike,
}

/// Parametric model family for sweeps: background level, signal shape and
/// lift size. The support is the first `s` columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPreset {
    pub kind: PresetKind,
    pub delta: f64,
    pub mu0_level: f64,
}

impl ModelPreset {
    pub fn build(&self, n: usize, p: usize, s: usize, sigma: f64) -> Result<ModelSpec> {
        if !(self.delta > 0.0) || !(self.mu0_level > 0.0) {
            return Err(Error::InvalidInput(
                "preset delta and mu0_level must be positive".into(),
            ));
        }
        let mu0 = vec![self.mu0_level; p];
        let signal = match self.kind {
            PresetKind::UniformLift => vec![self.mu0_level + self.delta; p],
            PresetKind::Spike => {
                let mut v = mu0.clone();
                v[0] += self.delta;
                v
            }
        };
        let spec = ModelSpec {
            n,
            p,
            sigma,
            mu0,
            mu_inf: self.mu0_level + self.delta,
            signals: (1..=s).map(|i| (i, signal.clone())).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn default_cell_cap() -> usize {
    10_000
}

/// Axes of a parameter sweep. Missing axes keep the base config's value.
/// Sweeping `n`, `p` or `s` requires a `preset` to rebuild the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    #[serde(default)]
    pub n: Option<Vec<usize>>,
    #[serde(default)]
    pub p: Option<Vec<usize>>,
    #[serde(default)]
    pub s: Option<Vec<usize>>,
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda_scale: Option<Vec<f64>>,
    #[serde(default)]
    pub preset: Option<ModelPreset>,
    #[serde(default = "default_cell_cap")]
    pub cell_cap: usize,
}

impl SweepGrid {
    pub fn cell_count(&self) -> usize {
        let len = |axis: &Option<Vec<usize>>| axis.as_ref().map_or(1, |v| v.len().max(1));
        let flen = |axis: &Option<Vec<f64>>| axis.as_ref().map_or(1, |v| v.len().max(1));
        len(&self.n) * len(&self.p) * len(&self.s) * flen(&self.sigma) * flen(&self.lambda_scale)
    }
}

/// Expand the grid against a base config into per-cell configs, in a fixed
/// order (n outermost, then p, s, sigma, lambda_scale).
pub fn expand_grid(grid: &SweepGrid, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let cells = grid.cell_count();
    if cells > grid.cell_cap {
        return Err(Error::GridTooLarge {
            cells,
            cap: grid.cell_cap,
        });
    }
    let needs_preset = grid.n.is_some() || grid.p.is_some() || grid.s.is_some();
    if needs_preset && grid.preset.is_none() {
        return Err(Error::InvalidInput(
            "sweeping n, p or s requires a model preset".into(),
        ));
    }
    let ns = grid.n.clone().unwrap_or_else(|| vec![base.model.n]);
    let ps = grid.p.clone().unwrap_or_else(|| vec![base.model.p]);
    let ss = grid
        .s
        .clone()
        .unwrap_or_else(|| vec![base.model.sparsity()]);
    let sigmas = grid.sigma.clone().unwrap_or_else(|| vec![base.model.sigma]);
    let scales: Vec<Option<f64>> = match &grid.lambda_scale {
        Some(v) => v.iter().copied().map(Some).collect(),
        None => vec![None],
    };

    let mut out = Vec::with_capacity(cells);
    for &n in &ns {
        for &p in &ps {
            for &s in &ss {
                for &sigma in &sigmas {
                    for scale in &scales {
                        let model = match &grid.preset {
                            Some(preset) => preset.build(n, p, s, sigma)?,
                            None => {
                                let mut m = base.model.clone();
                                m.sigma = sigma;
                                m
                            }
                        };
                        let estimators = match scale {
                            Some(sc) => base
                                .estimators
                                .iter()
                                .map(|e| e.with_lambda_scale(*sc))
                                .collect(),
                            None => base.estimators.clone(),
                        };
                        out.push(ExperimentConfig {
                            model,
                            estimators,
                            reps: base.reps,
                            seed: base.seed,
                            output_path: None,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Run every cell of a sweep. When a writer is given, rows are appended and
/// flushed as each cell finishes.
pub fn run_sweep(
    grid: &SweepGrid,
    base: &ExperimentConfig,
    mut writer: Option<&mut CsvWriter>,
) -> Result<Vec<RiskReport>> {
    let cells = expand_grid(grid, base)?;
    let mut reports = Vec::with_capacity(cells.len());
    for cfg in &cells {
        let report = run_risk_experiment(cfg)?;
        if let Some(w) = writer.as_deref_mut() {
            w.append_report(&report)?;
        }
        reports.push(report);
    }
    Ok(reports)
}
