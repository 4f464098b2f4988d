//! Seeded Monte Carlo checks that cross module boundaries: prior moments of
//! the two-prior construction, plug-in accuracy, sweep monotonicity, and
//! schedule independence of the harness.

use ghtlab::bounds::{ght_risk_bound, lower_bound_thm2, lower_bound_thm3};
use ghtlab::estimators::{estimate_background, EstimatorSpec};
use ghtlab::harness::{
    plugin_experiment, run_risk_experiment, run_sweep, ExperimentConfig, ModelPreset, PresetKind,
    SweepGrid,
};
use ghtlab::lower_bound::{sample_prior_pi1, two_prior_instance};
use ghtlab::model::{linear_functional, sample_background};
use ghtlab::rng::derive_seed;

/// Functional moments under the mixture prior: the first coordinate has
/// mean s sigma^2 eps / 2 and variance (1 - s/2n) s sigma^4 eps^2 / 2; all
/// other coordinates are deterministically zero.
#[test]
fn prior_functional_moments_match_closed_forms() {
    let n = 256usize;
    let s = 16usize;
    let sigma = 0.7f64;
    let mu0 = vec![2.0, 1.0, 1.0]; // first coordinate is the largest
    let inst = two_prior_instance(n, s, sigma, mu0[0]).unwrap();

    let draws = 100_000usize;
    let mut l1 = Vec::with_capacity(draws);
    for r in 0..draws {
        let m = sample_prior_pi1(&inst, n, 3, &mu0, derive_seed(31, r as u64)).unwrap();
        let l = linear_functional(&m, &mu0).unwrap();
        assert_eq!(l[1], 0.0);
        assert_eq!(l[2], 0.0);
        l1.push(l[0]);
    }

    let nf = draws as f64;
    let mean: f64 = l1.iter().sum::<f64>() / nf;
    let exact_mean = inst.mean_shift_coord1;
    let s2 = sigma * sigma;
    let exact_var = 0.5 * (1.0 - inst.mixture_weight) * s as f64 * s2 * s2 * inst.eps * inst.eps;
    let se_mean = (exact_var / nf).sqrt();
    assert!(
        (mean - exact_mean).abs() <= 3.0 * se_mean,
        "prior mean {mean} vs {exact_mean} (se {se_mean})"
    );

    let var: f64 = l1.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let m4: f64 = l1.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let se_var = ((m4 - var * var).max(0.0) / nf).sqrt();
    assert!(
        (var - exact_var).abs() <= 3.0 * se_var,
        "prior variance {var} vs {exact_var} (se {se_var})"
    );
}

/// Class-escape frequency at the reference scale: the empirical frequency
/// of drawing more than s modified columns sits at the exact binomial tail
/// (both are numerically zero at any feasible replication count).
#[test]
fn prior_class_escape_is_negligible() {
    let n = 32768usize;
    let s = 128usize;
    let inst = two_prior_instance(n, s, 1.0, 1.0).unwrap();
    let draws = 10_000usize;
    let mut escapes = 0usize;
    for r in 0..draws {
        let m = sample_prior_pi1(&inst, n, 1, &[1.0], derive_seed(77, r as u64)).unwrap();
        let count = (0..n).filter(|&j| m.col(j)[0] != 1.0).count();
        if count > s {
            escapes += 1;
        }
    }
    let emp = escapes as f64 / draws as f64;
    let exact = inst.class_escape_exact();
    // the empirical tail agrees with the exact one far within binomial noise
    assert!(emp <= exact + 3.0 * (exact * (1.0 - exact) / draws as f64).sqrt() + 1e-12);
    assert!(emp <= inst.class_escape_nominal());
    assert_eq!(escapes, 0);
}

fn plugin_config(m_aux: usize, reps: usize) -> ExperimentConfig {
    let preset = ModelPreset {
        kind: PresetKind::UniformLift,
        delta: 1.0,
        mu0_level: 1.0,
    };
    ExperimentConfig {
        model: preset.build(100, 16, 4, 0.1).unwrap(),
        estimators: vec![EstimatorSpec::GhtPlugin {
            m_aux,
            lambda_scale: 1.0,
        }],
        reps,
        seed: 1001,
        output_path: None,
    }
}

/// With a large auxiliary sample the plug-in matches the known-parameter
/// estimator closely.
#[test]
fn plugin_with_large_aux_matches_known_parameters() {
    let report = plugin_experiment(&plugin_config(10_000, 200)).unwrap();
    let plugin = report
        .estimators
        .iter()
        .find(|e| e.name == "ght_plugin")
        .unwrap();
    let known = report.estimators.iter().find(|e| e.name == "ght").unwrap();
    let rel = (plugin.mse - known.mse).abs() / known.mse;
    assert!(
        rel <= 0.10,
        "plugin mse {} vs known {} (rel {rel})",
        plugin.mse,
        known.mse
    );
}

/// Background estimates are unbiased at the 3-sigma level across
/// replications.
#[test]
fn background_plugin_bias_is_bounded() {
    let mu0 = vec![1.0f64; 16];
    let sigma = 0.1;
    let m_aux = 100usize;
    let reps = 200usize;
    let mut mean = vec![0.0f64; 16];
    for r in 0..reps {
        let aux = sample_background(&mu0, sigma, m_aux, derive_seed(55, r as u64));
        let est = estimate_background(aux.matrix()).unwrap();
        for (m, v) in mean.iter_mut().zip(est) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= reps as f64;
    }
    let tol = 3.0 * sigma * (1.0f64 / m_aux as f64).sqrt();
    for (j, m) in mean.iter().enumerate() {
        assert!((m - 1.0).abs() <= tol, "coordinate {j}: {m}");
    }
}

/// MSE of the thresholding estimator grows with the sparsity under a fixed
/// seed (more signal mass to estimate).
#[test]
fn sweep_mse_is_monotone_in_sparsity() {
    let preset = ModelPreset {
        kind: PresetKind::UniformLift,
        delta: 0.5,
        mu0_level: 1.0,
    };
    let base = ExperimentConfig {
        model: preset.build(100, 16, 1, 0.1).unwrap(),
        estimators: vec![EstimatorSpec::Ght { lambda_scale: 1.0 }],
        reps: 300,
        seed: 99,
        output_path: None,
    };
    let grid = SweepGrid {
        n: None,
        p: None,
        s: Some(vec![1, 2, 4, 8]),
        sigma: None,
        lambda_scale: None,
        preset: Some(preset),
        cell_cap: 100,
    };
    let reports = run_sweep(&grid, &base, None).unwrap();
    assert_eq!(reports.len(), 4);
    let mses: Vec<f64> = reports.iter().map(|r| r.estimators[0].mse).collect();
    for w in mses.windows(2) {
        assert!(w[0] <= w[1], "mse sequence not nondecreasing: {mses:?}");
    }
}

/// Identical configs give bitwise identical reports no matter how many
/// worker threads execute the replications.
#[test]
fn reports_do_not_depend_on_thread_count() {
    let preset = ModelPreset {
        kind: PresetKind::UniformLift,
        delta: 0.5,
        mu0_level: 1.0,
    };
    let cfg = ExperimentConfig {
        model: preset.build(30, 8, 3, 0.1).unwrap(),
        estimators: vec![
            EstimatorSpec::Naive,
            EstimatorSpec::Oracle,
            EstimatorSpec::Ght { lambda_scale: 1.0 },
            EstimatorSpec::GhtPlugin {
                m_aux: 20,
                lambda_scale: 1.0,
            },
        ],
        reps: 100,
        seed: 2024,
        output_path: None,
    };
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_risk_experiment(&cfg).unwrap());
    let several = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_risk_experiment(&cfg).unwrap());
    assert_eq!(single, several);
}

/// Whenever both lower-bound hypotheses hold, the upper bound dominates the
/// larger lower bound.
#[test]
fn upper_bound_dominates_lower_bounds_when_conditions_hold() {
    for &(n, p, s, sigma, mu_inf, mu0_max) in &[
        (32768usize, 16usize, 128usize, 0.09f64, 1.5f64, 1.0f64),
        (100_000, 64, 200, 0.05, 1.0, 0.8),
    ] {
        let upper = ght_risk_bound(n, p, s, sigma, mu_inf);
        let low2 = lower_bound_thm2(n, s, sigma, mu0_max);
        let low3 = lower_bound_thm3(s, p, sigma, mu_inf);
        assert!(upper.condition_ok, "config ({n},{p},{s})");
        assert!(low2.condition_ok && low3.condition_ok);
        assert!(low2.value.max(low3.value) <= upper.value);
    }
}
