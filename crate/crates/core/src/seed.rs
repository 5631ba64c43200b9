//! Deterministic derivation of per-frame RNG seeds.
//!
//! Seeds are a SplitMix64 fold over the identifying fields, so a frame can be
//! regenerated from its coordinates alone regardless of scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stochastic stream in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over a byte string, for folding names into a seed.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Incremental seed builder.
#[derive(Debug, Clone, Copy)]
pub struct SeedBuilder(u64);

impl SeedBuilder {
    pub fn new(master: u64) -> Self {
        SeedBuilder(splitmix64(master))
    }

    pub fn mix(self, value: u64) -> Self {
        SeedBuilder(splitmix64(self.0 ^ splitmix64(value)))
    }

    pub fn mix_str(self, s: &str) -> Self {
        self.mix(hash_str(s))
    }

    pub fn mix_f64(self, v: f64) -> Self {
        // +0.0 and -0.0 name the same grid point
        self.mix(if v == 0.0 { 0 } else { v.to_bits() })
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}
