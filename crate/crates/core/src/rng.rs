// SPDX-License-Identifier: Apache-2.0

//! Seed derivation.
//!
//! A run has one root seed. Every consumer (a circuit's shots, a bootstrap)
//! derives its own seed by mixing tags into the root, and large sample sets
//! are cut into fixed-size batches, each drawing from its own ChaCha stream.
//! Batch boundaries depend only on the sample count, never on the number of
//! workers, so results are reproducible under any parallel schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per independently seeded batch.
pub const BATCH: usize = 4096;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `tags` into `seed`, order-sensitively.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Generator for batch `stream` of the sample set seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of batches needed for `n` samples.
pub fn batch_count(n: usize) -> usize {
    n.div_ceil(BATCH)
}

/// Index range covered by batch `b` of `n` samples.
pub fn batch_range(n: usize, b: usize) -> std::ops::Range<usize> {
    let start = b * BATCH;
    start..(start + BATCH).min(n)
}
