//! Counter-based randomness.
//!
//! Every random quantity in the library is addressed by a tuple of integers
//! (seed, replication, purpose, vertex, ...). A value is a pure function of
//! its address, so results never depend on evaluation or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Absorbs a sequence of words into a single 64-bit key.
#[inline]
pub fn absorb(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed.wrapping_add(GOLDEN));
    for &w in words {
        h = mix64(h ^ w.wrapping_mul(GOLDEN).wrapping_add(0x632b_e59b_d9b4_e019));
    }
    h
}

/// Maps a 64-bit key to a uniform in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_f64(key: u64) -> f64 {
    (key >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Purpose tags keep streams of different modules disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u64)]
pub enum Purpose {
    Edges = 1,
    GammaZero = 2,
    Gaussian = 3,
    Oracle = 4,
    Generic = 5,
}

/// Seed provenance: a stream identifier plus the replication index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedTag {
    pub stream: u64,
    pub replication: u64,
}

impl SeedTag {
    pub const fn new(stream: u64, replication: u64) -> Self {
        Self { stream, replication }
    }

    pub fn with_replication(self, replication: u64) -> Self {
        Self { replication, ..self }
    }

    /// Root key for one purpose.
    pub fn key(&self, purpose: Purpose) -> u64 {
        absorb(self.stream, &[self.replication, purpose as u64])
    }

    /// A sequential generator for samplers that consume draws one after another.
    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        self.rng_at(purpose, 0)
    }

    /// As [`SeedTag::rng`], with an extra sub-stream index.
    pub fn rng_at(&self, purpose: Purpose, sub: u64) -> ChaCha8Rng {
        let k = absorb(self.stream, &[self.replication, purpose as u64, sub]);
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.chunks_mut(8).enumerate() {
            chunk.copy_from_slice(&mix64(k ^ (i as u64).wrapping_mul(GOLDEN)).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
