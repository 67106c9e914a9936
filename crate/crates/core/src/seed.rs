//! Deterministic seed derivation.
//!
//! Every random draw in the harness flows from one master seed. Sub-seeds are
//! derived from `(master, path)` so that parallel and serial generation see the
//! same streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `path` into `master`, one component at a time.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(master), |acc, &part| splitmix(acc ^ splitmix(part)))
}

/// FNV-1a over the bytes of `s`; used to key randomness by string ids.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Stream labels so that unrelated draws never share a sub-seed.
pub mod stream {
    pub const CLASSIFIER: u64 = 1;
    pub const TRAIN_INPUT: u64 = 2;
    pub const TEST_INPUT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const FEW_SHOT: u64 = 5;
    pub const PRETRAIN: u64 = 6;
    pub const POOL: u64 = 7;
    pub const CORRUPTION: u64 = 8;
    pub const PERTURB: u64 = 9;
    pub const SWEEP: u64 = 10;
}
