//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha8 stream selected by
//! `(seed, stream)`, so work split across threads sees the same numbers as a
//! sequential run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream for item `index` of step `step` (a generation, an iteration).
pub fn step_stream(seed: u64, step: u64, index: u64) -> StreamRng {
    stream(seed, (step << 32) ^ index)
}
