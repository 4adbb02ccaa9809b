//! Counter-based seed derivation.
//!
//! Every random stream in an experiment is derived from the master seed by
//! mixing in a path of counters (repetition, cycle, purpose). Adding a new
//! repetition or purpose never shifts the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags, so that two consumers at the same (repetition, cycle)
/// never share a stream.
pub mod purpose {
    pub const DATA: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const INITIAL: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const CLUSTER: u64 = 5;
    pub const DRAW: u64 = 6;
    pub const MC_DROPOUT: u64 = 7;
    pub const REPETITION: u64 = 8;
    pub const CYCLE: u64 = 9;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derive a child seed from `parent` and a counter.
pub fn derive(parent: u64, counter: u64) -> u64 {
    splitmix64(parent ^ splitmix64(counter.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
