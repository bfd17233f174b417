//! Seeded random streams.
//!
//! Every run derives its generators from a single `u64` seed. The generator is
//! ChaCha8, a counter-based stream cipher: the seed is expanded into the key
//! and each consumer gets its own 64-bit stream id, so streams never overlap
//! and draws are identical on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Prng = ChaCha8Rng;

/// Stream ids reserved for the consumers inside one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Environment = 2,
    Replay = 3,
    Exploration = 4,
    Posterior = 5,
}

pub const GENERATOR_NAME: &str = "ChaCha8 (seed_from_u64 key, one stream id per consumer)";

pub fn stream(seed: u64, which: Stream) -> Prng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Plain generator for tests and ad-hoc use (stream 0).
pub fn seeded(seed: u64) -> Prng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws a fresh child seed from `rng`.
pub fn child_seed(rng: &mut Prng) -> u64 {
    rng.next_u64()
}
