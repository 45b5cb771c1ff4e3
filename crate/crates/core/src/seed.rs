//! Counter-based seed derivation.
//!
//! Every random draw in a run is keyed by `(base seed, purpose, counters...)`
//! rather than by a long-lived generator, so a resumed run reproduces exactly
//! the draws an uninterrupted run would have made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(base: u64, parts: &[u64]) -> ChaCha8Rng {
    rng(derive(base, parts))
}

// Purpose tags keep independent streams apart.
pub const TAG_SHUFFLE: u64 = 1;
pub const TAG_CROP: u64 = 2;
pub const TAG_NOISE: u64 = 3;
pub const TAG_GEN_INIT: u64 = 4;
pub const TAG_DISC_INIT: u64 = 5;
pub const TAG_SAMPLE: u64 = 6;
pub const TAG_VAE: u64 = 7;
