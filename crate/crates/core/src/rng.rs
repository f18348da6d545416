//! Seeded random streams.
//!
//! Every consumer of randomness in a run draws from its own ChaCha stream
//! derived from the run seed, so changing how one component consumes
//! randomness never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named stream identifiers used by the search loop and harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Candidates = 2,
    Ranker = 3,
    Shuffle = 4,
    Evolution = 5,
    Prune = 6,
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    indexed(seed, which as u64)
}

/// Stream `index` of the generator seeded by `seed`.
pub fn indexed(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
