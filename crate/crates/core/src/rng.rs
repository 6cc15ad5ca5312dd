//! Seed derivation.
//!
//! Every stochastic stage receives its own ChaCha8 stream derived from one
//! master seed and a list of tags (stage id, class, culture, ...). The
//! derivation folds each tag into the state with a SplitMix64 finalizer, so
//! streams are stable across runs and independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stage tags used by the experiment drivers.
pub mod stage {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const GENETIC: u64 = 3;
    pub const ENRICH: u64 = 4;
    pub const REHEARSE: u64 = 5;
    pub const RANDOM_VECTORS: u64 = 6;
    pub const DATA: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from(master: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, tags))
}
