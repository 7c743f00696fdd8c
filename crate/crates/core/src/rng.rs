//! Seeded, replayable random streams.
//!
//! Every experiment takes one 64-bit seed; sub-tasks (trials, recursive
//! sampler calls) get child seeds derived by mixing the parent seed with a
//! stream index, so any piece can be replayed on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `seed`.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child seed for stream `index` of `seed` (SplitMix64 finalizer).
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for stream `index` of `seed`.
pub fn child_rng(seed: u64, index: u64) -> Rng {
    rng_from_seed(child_seed(seed, index))
}
