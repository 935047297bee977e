//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of an explicit
//! key: a 64-bit seed combined with structural coordinates (site, replica,
//! draw index) through a splitmix-style finalizer. Conditioning on frozen
//! sites therefore never perturbs the draws of unfrozen sites, and
//! evaluating replicas in any order (or concurrently) gives identical
//! results.

use crate::geometry::Site;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fold(state: u64, word: u64) -> u64 {
    mix(state.wrapping_add(GOLDEN).wrapping_add(word))
}

/// Uniform deviate in the open interval (0, 1).
fn to_unit(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Deviate attached to a lattice site within a given replica.
pub fn site_uniform(seed: u64, replica: u64, site: Site) -> f64 {
    let mut k = fold(seed, 0x5159);
    k = fold(k, replica);
    k = fold(k, site.x as u64);
    k = fold(k, site.y as u64);
    to_unit(k)
}

/// A sequential stream for draws that have no site structure (boundary
/// data, chain steps, instance generation). The stream is itself keyed, so
/// two streams with the same `(seed, stream)` pair replay identically.
#[derive(Clone, Debug)]
pub struct KeyedStream {
    key: u64,
    counter: u64,
}

impl KeyedStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        KeyedStream {
            key: fold(fold(seed, 0x57ae), stream),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let w = fold(self.key, self.counter);
        self.counter += 1;
        w
    }

    /// Uniform in (0, 1).
    pub fn next_unit(&mut self) -> f64 {
        to_unit(self.next_u64())
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    /// Uniform integer in [0, n).
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Symmetric uniform in (-1, 1).
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }

    /// Draw an index from an unnormalized weight vector by inverse CDF.
    pub fn next_weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut target = self.next_unit() * total;
        for (i, &w) in weights.iter().enumerate() {
            target -= w;
            if target <= 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }
}
