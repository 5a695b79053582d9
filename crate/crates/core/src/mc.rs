//! Seed streams and order-stable parallel reductions.
//!
//! Work is cut into fixed-size chunks and chunk `i` always draws from stream
//! `i` of the caller's seed, so results do not depend on the worker count.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub(crate) const CHUNK: usize = 256;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f` over chunks of `0..n` in parallel and returns the per-chunk
/// results in chunk order.
pub(crate) fn par_chunks<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, Range<usize>) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            f(&mut rng, c * CHUNK..((c + 1) * CHUNK).min(n))
        })
        .collect()
}

/// Pairwise summation in a fixed tree order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean with its normal-approximation standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let var = if n > 1 {
            let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
            pairwise_sum(&dev) / (n - 1) as f64
        } else {
            0.0
        };
        MonteCarloEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        }
    }
}
