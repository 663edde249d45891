//! Seeded randomness.
//!
//! All generators are ChaCha8, whose output stream is fixed for a given seed
//! across platforms and crate versions.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer: a bijective mix used to derive independent child seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `stream` of `parent`.
///
/// `derive_seed(p, i) = splitmix64(p ^ splitmix64(i))`. Distinct streams of
/// the same parent are decorrelated, and a child depends only on
/// `(parent, stream)`.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream))
}
