//! Seeded random streams.
//!
//! Every sampler takes an explicit generator. Parallel replicates draw from
//! disjoint ChaCha streams of one root seed, so results do not depend on
//! thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for substream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Root generator of `seed` (substream 0).
pub fn root(seed: u64) -> StreamRng {
    stream(seed, 0)
}
