//! Seed derivation. Every random stream in an experiment is derived from the
//! master seed with a fixed SplitMix64 mixing rule, so streams never share state
//! and replays can rebuild any one of them independently.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for [`derive_seed`].
pub mod stream {
    pub const PREDICTOR: u64 = 1;
    pub const AGENT: u64 = 2;
    pub const ENVIRONMENT: u64 = 3;
    pub const TRUTH: u64 = 4;
    pub const INTERIOR: u64 = 5;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(parent, tag)`.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag.wrapping_mul(GOLDEN)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
