//! Deterministic stream derivation for reproducible parallel runs.
//!
//! All randomness in a run derives from one master seed. Each logical
//! consumer (a replicate, a validation chain, a scenario stage) receives its
//! own counter-indexed ChaCha stream, so results are independent of thread
//! scheduling and replicates can run in parallel without sharing RNG state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives independent, reproducible RNG streams from a master seed.
#[derive(Clone, Copy, Debug)]
pub struct SeedSequence {
    master: u64,
}

impl SeedSequence {
    pub fn new(master: u64) -> Self {
        SeedSequence { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Stream `index` of this seed. Streams with distinct indices are
    /// statistically independent ChaCha8 keystreams.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(index);
        rng
    }

    /// Sub-splits a stream index space, e.g. one block per replicate.
    pub fn substream(&self, block: u64, index: u64) -> ChaCha8Rng {
        // 2^32 indices per block is far more than any run consumes.
        self.stream(block.wrapping_shl(32) | index)
    }
}
