//! Deterministic seed derivation.
//!
//! Every random decision in this crate flows from a single `u64` master seed.
//! Components (chain generation, dataset splitting, evolution runs, per-genome
//! training) each get their own derived seed so that they draw from independent
//! streams and so that reordering or parallelising work never changes results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step. Used only to whiten seed material; the actual random
/// streams come from ChaCha.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a tag identifying the consumer.
///
/// The same `(seed, tag)` pair always yields the same child, and distinct tags
/// yield children that are unrelated for all practical purposes.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_mul(0xA24BAED4963EE407)))
}

/// Chains several tags, e.g. `(run seed, generation, index)`.
pub fn derive_seed3(seed: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(seed, a), b)
}

/// A deterministic generator for the given derived seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
