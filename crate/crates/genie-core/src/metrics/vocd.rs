//! vocd-D lexical diversity.
//!
//! The measure draws many fixed-size random samples of tokens, averages their
//! type-token ratios, and fits the parameter `D` of the theoretical curve
//!
//! ```text
//! TTR(n) = (D/n) * (sqrt(1 + 2n/D) - 1)
//! ```
//!
//! against the empirical means by least squares. Larger `D` means a flatter
//! curve, i.e. richer vocabulary. Types are counted over lowercased pipeline
//! tokens.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text;

use super::MetricsError;

/// Sentinel reported when the fit diverges (e.g. every token distinct, so the
/// empirical TTR is 1.0 at all sizes and the optimum runs off to infinity).
pub const D_MAX: f64 = 10_000.0;

const D_MIN: f64 = 1e-3;

/// Sampling parameters for the vocd procedure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocdConfig {
    pub size_min: usize,
    pub size_max: usize,
    pub samples_per_size: usize,
    pub seed: u64,
}

impl Default for VocdConfig {
    fn default() -> Self {
        VocdConfig {
            size_min: 35,
            size_max: 50,
            samples_per_size: 100,
            seed: 42,
        }
    }
}

/// Outcome of a vocd-D run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiversityReport {
    pub d_value: f64,
    pub samples_per_size: usize,
    pub size_range: (usize, usize),
    pub seed: u64,
}

/// Compute vocd-D for `input`.
///
/// Sampling is without replacement and driven entirely by the seeded RNG and
/// the token count, never by token values, so bijectively renaming the
/// vocabulary leaves the result bit-identical under the same seed.
pub fn vocd_d(input: &str, cfg: &VocdConfig) -> Result<DiversityReport, MetricsError> {
    let type_ids = intern_tokens(input);
    vocd_d_ids(&type_ids, cfg)
}

fn vocd_d_ids(type_ids: &[u32], cfg: &VocdConfig) -> Result<DiversityReport, MetricsError> {
    if cfg.size_min < 1 || cfg.size_min > cfg.size_max || cfg.samples_per_size == 0 {
        return Err(MetricsError::BadSampling);
    }
    if type_ids.len() < cfg.size_max {
        return Err(MetricsError::TextTooShort {
            needed: cfg.size_max,
            got: type_ids.len(),
        });
    }
    let vocab = type_ids.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // epoch-stamped scratch table: counting distinct ids per sample without
    // clearing between samples
    let mut stamp = vec![0u32; vocab];
    let mut epoch = 0u32;

    let mut points = Vec::with_capacity(cfg.size_max - cfg.size_min + 1);
    for n in cfg.size_min..=cfg.size_max {
        let mut ttr_sum = 0.0;
        for _ in 0..cfg.samples_per_size {
            epoch += 1;
            let mut distinct = 0usize;
            for idx in rand::seq::index::sample(&mut rng, type_ids.len(), n) {
                let id = type_ids[idx] as usize;
                if stamp[id] != epoch {
                    stamp[id] = epoch;
                    distinct += 1;
                }
            }
            ttr_sum += distinct as f64 / n as f64;
        }
        points.push((n as f64, ttr_sum / cfg.samples_per_size as f64));
    }

    Ok(DiversityReport {
        d_value: fit_d(&points),
        samples_per_size: cfg.samples_per_size,
        size_range: (cfg.size_min, cfg.size_max),
        seed: cfg.seed,
    })
}

/// Map tokens to dense type ids in first-appearance order.
fn intern_tokens(input: &str) -> Vec<u32> {
    let mut table: HashMap<String, u32> = HashMap::new();
    let mut ids = Vec::new();
    for word in text::words(input) {
        let lowered = word.to_lowercase();
        let next = table.len() as u32;
        let id = *table.entry(lowered).or_insert(next);
        ids.push(id);
    }
    ids
}

/// Theoretical type-token ratio at sample size `n` for parameter `d`.
pub fn ttr_curve(d: f64, n: f64) -> f64 {
    (d / n) * ((1.0 + 2.0 * n / d).sqrt() - 1.0)
}

/// Least-squares fit of `D` to empirical `(n, mean TTR)` points.
///
/// Coarse log-spaced grid, then golden-section refinement of the best
/// bracket. Returns [`D_MAX`] when the optimum runs into the upper bound.
pub fn fit_d(points: &[(f64, f64)]) -> f64 {
    let sse = |d: f64| -> f64 {
        points
            .iter()
            .map(|&(n, ttr)| {
                let r = ttr - ttr_curve(d, n);
                r * r
            })
            .sum()
    };

    let (lo_ln, hi_ln) = (D_MIN.ln(), D_MAX.ln());
    let steps = 280;
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        let d = (lo_ln + (hi_ln - lo_ln) * i as f64 / steps as f64).exp();
        let v = sse(d);
        if v < best {
            best = v;
            best_i = i;
        }
    }

    let bracket = |i: i64| lo_ln + (hi_ln - lo_ln) * i as f64 / steps as f64;
    let mut a = bracket((best_i as i64 - 1).max(0));
    let mut b = bracket(((best_i + 1) as i64).min(steps as i64));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..120 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if sse(c.exp()) <= sse(d.exp()) {
            b = d;
        } else {
            a = c;
        }
    }
    let fitted = ((a + b) / 2.0).exp();
    if fitted >= 0.999 * D_MAX {
        D_MAX
    } else {
        fitted
    }
}
