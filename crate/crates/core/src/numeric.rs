//! Small numerical helpers shared by the bound and lab modules.

use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// log of the Poisson(rate) pmf at k.
pub fn poisson_ln_pmf(rate: f64, k: u64) -> f64 {
    let kf = k as f64;
    -rate + kf * rate.ln() - ln_gamma(kf + 1.0)
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Chernoff bound on the Poisson upper tail: P(X >= k) <= e^{k - rate - k ln(k/rate)}
/// for k > rate (and 1 otherwise).
pub fn poisson_tail_chernoff(rate: f64, k: f64) -> f64 {
    if k <= rate {
        1.0
    } else {
        (k - rate - k * (k / rate).ln()).exp()
    }
}

/// Exact upper tail P(Z > k) for Z ~ Binomial(n, q), summed directly in
/// log space from the dominant term down, so extreme tails keep full
/// relative precision.
pub fn binomial_tail_gt(n: u64, q: f64, k: u64) -> f64 {
    assert!((0.0..=1.0).contains(&q), "q must be a probability");
    if k >= n {
        return 0.0;
    }
    let nf = n as f64;
    let ln_q = q.ln();
    let ln_1mq = (-q).ln_1p();
    let ln_pmf = |j: u64| {
        let jf = j as f64;
        ln_gamma(nf + 1.0) - ln_gamma(jf + 1.0) - ln_gamma(nf - jf + 1.0)
            + jf * ln_q
            + (nf - jf) * ln_1mq
    };
    // terms decay geometrically past the mean; accumulate relative to the first
    let first = ln_pmf(k + 1);
    let mut sum = 0.0f64;
    for j in (k + 1)..=n {
        let t = (ln_pmf(j) - first).exp();
        sum += t;
        if t < 1e-18 * sum {
            break;
        }
    }
    first.exp() * sum
}

/// Two-sided 95% Clopper-Pearson interval for a binomial proportion.
pub fn binomial_ci95(successes: usize, trials: usize) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let alpha = 0.05f64;
    let x = successes as f64;
    let n = trials as f64;
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x)
            .unwrap()
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Mean and standard error of the mean of a sample (two-pass).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n > 0);
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
