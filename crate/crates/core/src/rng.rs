//! Seed plumbing. Every random decision in the crate flows through a
//! `ChaCha8Rng` derived from a caller-supplied seed and a fixed stream tag,
//! so results are reproducible across platforms and independent streams
//! never alias (k-means restarts, constraint sampling, baseline selection,
//! ... each get their own tag).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates structured seed/tag pairs.
pub(crate) fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tag))
}

/// Indexed sub-stream: one independent generator per (seed, tag, idx)
/// triple, e.g. per restart or per constraint set.
pub(crate) fn stream2(seed: u64, tag: u64, idx: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed, tag), idx))
}

// Stream tags. Arbitrary distinct constants; never reuse one for a new purpose.
pub(crate) const TAG_KMEANS_RESTART: u64 = 1;
pub(crate) const TAG_KMEDOIDS_RESTART: u64 = 2;
pub(crate) const TAG_INNER_EVAL: u64 = 4;
pub(crate) const TAG_SYNTH: u64 = 5;
pub(crate) const TAG_CONSTRAINTS: u64 = 6;
pub(crate) const TAG_TRANSFORM_KMEANS: u64 = 7;
pub(crate) const TAG_TRANSFORM_SELECT: u64 = 8;
pub(crate) const TAG_EXPERIMENT_CELL: u64 = 10;
