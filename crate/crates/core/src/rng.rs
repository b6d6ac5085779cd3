//! Reproducible random streams.
//!
//! Every consumer derives its generator from an explicit 64-bit seed and a
//! stream index, so shards of a computation draw the same numbers no matter
//! how many workers execute them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ChaCha8 keyed by `seed`, positioned on an independent `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
