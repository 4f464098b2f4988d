//! Seeded randomness: stream derivation and exact Poisson sampling.
//!
//! Every simulation in this crate draws from `ChaCha8` streams keyed by
//! `(seed, stream)`, with child seeds derived through the SplitMix64
//! finalizer. Replications, columns and auxiliary samples each get their own
//! stream, so results are bit-identical under any thread schedule.
//!
//! Derivation rule (documented contract, relied on by the harness):
//!
//! ```text
//! derive_seed(seed, index) = mix64(seed + (index + 1) * 0x9E3779B97F4A7C15)
//! ```
//!
//! where `mix64` is the SplitMix64 output mixer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output mixer (Steele, Lea & Flood's finalizer).
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed for the given index (replication, slot, ...).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// ChaCha8 generator for one `(seed, stream)` pair. Distinct streams under
/// the same seed are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Exact Poisson draw with the given mean.
///
/// CDF inversion by sequential search for `mean < 10`, Hormann's PTRS
/// transformed rejection above. Both methods sample the exact distribution;
/// no normal approximation is involved at any mean.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    assert!(
        mean > 0.0 && mean.is_finite(),
        "poisson mean must be positive and finite, got {mean}"
    );
    if mean < 10.0 {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let u: f64 = rng.random();
    let mut pmf = (-mean).exp();
    let mut cdf = pmf;
    let mut k = 0u64;
    while u > cdf {
        k += 1;
        pmf *= mean / k as f64;
        cdf += pmf;
        if pmf < 1e-300 {
            // cdf saturated below 1.0 by rounding; u cannot be reached
            break;
        }
    }
    k
}

/// Hormann (1993) PTRS: rejection from a transformed uniform envelope with a
/// squeeze step. Valid for mean >= 10.
fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let b = 0.931 + 2.53 * mean.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    let ln_mean = mean.ln();
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= k * ln_mean - mean - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}
