//! Seed derivation.
//!
//! All randomness comes from ChaCha8 (`rand_chacha` 0.9). A master seed is
//! expanded into per-task seeds with a SplitMix64 finalizer over the master
//! seed, a purpose tag and an index, so replicate `k` of a run is the same
//! whether the run asked for `K` or `K + 1` replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags keep the streams of different consumers disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Noise = 1,
    McReplicate = 2,
    RecoveryNoise = 3,
    RecoveryStart = 4,
    GridPoint = 5,
    Experiment = 6,
    Kernel = 7,
    Rhs = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for task `index` of kind `stream` under `seed`.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64((stream as u64) << 48 ^ index))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, stream: Stream, index: u64) -> Rng {
    rng_from_seed(derive_seed(seed, stream, index))
}
