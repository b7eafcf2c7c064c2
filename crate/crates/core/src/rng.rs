//! Deterministic random streams.
//!
//! Every stochastic operation takes an explicit seed; work split across
//! partitions draws from independent ChaCha streams selected by index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for partition `index` of the computation seeded by `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
