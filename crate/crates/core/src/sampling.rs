//! Seeded per-sample random streams.
//!
//! Sample `i` of a campaign draws from its own ChaCha8 stream keyed by
//! `(seed, i)`, so the coordinates of every sample are independent of
//! evaluation order and thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rejection attempts allowed per requested sample.
pub const MAX_ATTEMPTS: usize = 100;

pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub index: usize,
    /// `None` when every attempt was rejected.
    pub point: Option<Vec<f64>>,
    pub rejected: usize,
}

/// Draws candidates until `accept` holds or the attempt budget runs out.
pub fn draw(
    seed: u64,
    index: usize,
    propose: impl Fn(&mut ChaCha8Rng) -> Vec<f64>,
    accept: impl Fn(&[f64]) -> bool,
) -> Sample {
    let mut rng = rng_for(seed, index as u64);
    for attempt in 0..MAX_ATTEMPTS {
        let x = propose(&mut rng);
        if accept(&x) {
            return Sample { index, point: Some(x), rejected: attempt };
        }
    }
    Sample { index, point: None, rejected: MAX_ATTEMPTS }
}
