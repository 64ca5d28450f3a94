//! Counter-based random streams.
//!
//! Every stream is addressed by a `(seed, replicate, purpose, index)` tuple
//! that is used verbatim as a ChaCha key. Two distinct addresses give
//! independent streams, and a stream's content never depends on which
//! thread consumes it or in what order, so parallel maps are reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Keeps the draws for data generation,
/// missingness, imputation and bootstrap from ever overlapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Cohort = 1,
    Missingness = 2,
    Imputation = 3,
    Bootstrap = 4,
    Method = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Substream {
    seed: u64,
    replicate: u64,
    purpose: u64,
    index: u64,
}

impl Substream {
    pub fn new(seed: u64) -> Self {
        Self { seed, replicate: 0, purpose: 0, index: 0 }
    }

    pub fn replicate(self, replicate: u64) -> Self {
        Self { replicate, ..self }
    }

    pub fn purpose(self, purpose: Purpose) -> Self {
        Self { purpose: purpose as u64, ..self }
    }

    pub fn index(self, index: u64) -> Self {
        Self { index, ..self }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([self.seed, self.replicate, self.purpose, self.index])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
