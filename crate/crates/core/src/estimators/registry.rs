//! Estimator strategies behind a common trait, registered by name and
//! selected at runtime from configuration or the CLI.

use serde::{Deserialize, Serialize};

use super::{
    estimate_background, estimate_sigma_entries, ght_estimate, naive_estimate, oracle_estimate,
    threshold_lambda, FunctionalEstimate, DEFAULT_LAMBDA_SCALE,
};
use crate::error::{Error, Result};
use crate::model::{ColMatrix, ObservationMatrix, SupportSet};

/// Everything a strategy may consume for one replication. Strategies use
/// only the fields they are entitled to: the oracle reads `true_support`,
/// the plug-in reads `aux` (and ignores the known `mu0` / `sigma`).
pub struct EstimationInput<'a> {
    pub x: &'a ObservationMatrix,
    pub mu0: &'a [f64],
    pub sigma: f64,
    pub true_support: Option<&'a SupportSet>,
    /// Auxiliary background-only draws (columns), when requested via
    /// [`Estimator::aux_columns`].
    pub aux: Option<&'a ColMatrix>,
}

/// A strategy for estimating `L(M)` from one observation matrix.
pub trait Estimator: Send + Sync {
    /// Registry name; also the `estimator` label in CSV output.
    fn name(&self) -> &'static str;

    /// The `lambda_scale` knob, for strategies that have one.
    fn lambda_scale(&self) -> Option<f64> {
        None
    }

    /// Number of auxiliary background vectors the strategy needs per
    /// replication (0 for none).
    fn aux_columns(&self) -> usize {
        0
    }

    fn estimate(&self, input: &EstimationInput<'_>) -> Result<FunctionalEstimate>;
}

/// Serializable strategy selector. Externally tagged, so configs read
/// `"naive"`, `"oracle"`, `{"ght":{"lambda_scale":…}}`,
/// `{"ght_plugin":{"m_aux":…,"lambda_scale":…}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorSpec {
    Naive,
    Oracle,
    Ght {
        #[serde(default = "default_scale")]
        lambda_scale: f64,
    },
    GhtPlugin {
        m_aux: usize,
        #[serde(default = "default_scale")]
        lambda_scale: f64,
    },
}

fn default_scale() -> f64 {
    DEFAULT_LAMBDA_SCALE
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Naive => "naive",
            EstimatorSpec::Oracle => "oracle",
            EstimatorSpec::Ght { .. } => "ght",
            EstimatorSpec::GhtPlugin { .. } => "ght_plugin",
        }
    }

    /// Look up a registered strategy by name, with default parameters.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "naive" => Some(EstimatorSpec::Naive),
            "oracle" => Some(EstimatorSpec::Oracle),
            "ght" => Some(EstimatorSpec::Ght {
                lambda_scale: default_scale(),
            }),
            "ght_plugin" => Some(EstimatorSpec::GhtPlugin {
                m_aux: 100,
                lambda_scale: default_scale(),
            }),
            _ => None,
        }
    }

    /// The strategy's `lambda_scale`, if it has the knob.
    pub fn lambda_scale(&self) -> Option<f64> {
        match self {
            EstimatorSpec::Ght { lambda_scale } | EstimatorSpec::GhtPlugin { lambda_scale, .. } => {
                Some(*lambda_scale)
            }
            _ => None,
        }
    }

    /// Same strategy with the `lambda_scale` knob overridden (no-op for
    /// strategies without it).
    pub fn with_lambda_scale(&self, scale: f64) -> Self {
        match self {
            EstimatorSpec::Ght { .. } => EstimatorSpec::Ght {
                lambda_scale: scale,
            },
            EstimatorSpec::GhtPlugin { m_aux, .. } => EstimatorSpec::GhtPlugin {
                m_aux: *m_aux,
                lambda_scale: scale,
            },
            other => other.clone(),
        }
    }

    /// Instantiate the strategy object.
    pub fn build(&self) -> Box<dyn Estimator> {
        match self {
            EstimatorSpec::Naive => Box::new(NaiveEstimator),
            EstimatorSpec::Oracle => Box::new(OracleEstimator),
            EstimatorSpec::Ght { lambda_scale } => Box::new(GhtEstimator {
                lambda_scale: *lambda_scale,
            }),
            EstimatorSpec::GhtPlugin {
                m_aux,
                lambda_scale,
            } => Box::new(GhtPluginEstimator {
                m_aux: *m_aux,
                lambda_scale: *lambda_scale,
            }),
        }
    }
}

/// Names of all registered strategies.
pub fn registry() -> &'static [&'static str] {
    &["naive", "oracle", "ght", "ght_plugin"]
}

/// Sums all centered columns; uses the sparsity assumption not at all.
pub struct NaiveEstimator;

impl Estimator for NaiveEstimator {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn estimate(&self, input: &EstimationInput<'_>) -> Result<FunctionalEstimate> {
        naive_estimate(input.x, input.mu0)
    }
}

/// Sums the centered columns of the true support (infeasible reference).
pub struct OracleEstimator;

impl Estimator for OracleEstimator {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn estimate(&self, input: &EstimationInput<'_>) -> Result<FunctionalEstimate> {
        let support = input.true_support.ok_or_else(|| {
            Error::InvalidInput("oracle estimator requires the true support".into())
        })?;
        oracle_estimate(input.x, input.mu0, support)
    }
}

/// Group hard thresholding with known `mu0` and `sigma`.
pub struct GhtEstimator {
    pub lambda_scale: f64,
}

impl Estimator for GhtEstimator {
    fn name(&self) -> &'static str {
        "ght"
    }

    fn lambda_scale(&self) -> Option<f64> {
        Some(self.lambda_scale)
    }

    fn estimate(&self, input: &EstimationInput<'_>) -> Result<FunctionalEstimate> {
        let lambda = threshold_lambda(input.x.n(), input.x.p(), input.mu0, self.lambda_scale);
        ght_estimate(input.x, input.mu0, input.sigma, Some(lambda))
    }
}

/// Group hard thresholding with `mu0` estimated from the auxiliary sample
/// and `sigma` estimated from the grid step of the pooled entries. The
/// known parameters in the input are ignored.
pub struct GhtPluginEstimator {
    pub m_aux: usize,
    pub lambda_scale: f64,
}

impl Estimator for GhtPluginEstimator {
    fn name(&self) -> &'static str {
        "ght_plugin"
    }

    fn lambda_scale(&self) -> Option<f64> {
        Some(self.lambda_scale)
    }

    fn aux_columns(&self) -> usize {
        self.m_aux
    }

    fn estimate(&self, input: &EstimationInput<'_>) -> Result<FunctionalEstimate> {
        let aux = input.aux.ok_or_else(|| {
            Error::InvalidInput("plug-in estimator requires an auxiliary sample".into())
        })?;
        if aux.rows() != input.x.p() {
            return Err(Error::DimensionMismatch(format!(
                "auxiliary sample has {} rows, expected p = {}",
                aux.rows(),
                input.x.p()
            )));
        }
        let mu0_hat = estimate_background(aux)?;
        let pooled: Vec<f64> = aux
            .entries()
            .iter()
            .chain(input.x.matrix().entries())
            .copied()
            .collect();
        let sigma_hat = estimate_sigma_entries(&pooled)?.sigma;
        let lambda = threshold_lambda(input.x.n(), input.x.p(), &mu0_hat, self.lambda_scale);
        ght_estimate(input.x, &mu0_hat, sigma_hat, Some(lambda))
    }
}
