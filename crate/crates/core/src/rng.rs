//! Seeded random substreams.
//!
//! Every run owns one seed. Independent consumers (initial point, candidate
//! sampling, per-evaluation measurement noise) draw from separate ChaCha
//! streams keyed by that seed, so two strategies run with the same seed share
//! their initialization without sharing noise realizations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    Init = 1,
    Sampling = 2,
    Noise = 3,
}

/// Random stream for `(seed, substream, index)`.
pub fn substream(seed: u64, kind: Substream, index: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << 56) ^ index);
    rng
}

/// Hands out one noise stream per evaluation of a run.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    seed: u64,
    next: u64,
}

impl NoiseStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed, next: 0 }
    }

    /// Number of streams handed out so far.
    pub fn issued(&self) -> u64 {
        self.next
    }

    pub fn next_rng(&mut self) -> RunRng {
        let rng = substream(self.seed, Substream::Noise, self.next);
        self.next += 1;
        rng
    }
}
