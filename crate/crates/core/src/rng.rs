//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] built by
//! [`stream`]. A `(seed, index)` pair selects the key (from `seed`) and the
//! ChaCha stream id (from `index`), so independent jobs such as chains,
//! repetitions and folds get non-overlapping sequences regardless of the order
//! in which they are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Random stream `index` under master seed `seed`.
pub fn stream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed from `(seed, index)` with a SplitMix64 finalizer.
///
/// Used where a job needs a seed of its own rather than a stream, e.g. a
/// repetition that spawns several chains.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
