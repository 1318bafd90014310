//! Seeded random streams.
//!
//! Every run derives its randomness from the 64-bit config seed. Each consumer
//! gets its own ChaCha8 stream selected by a fixed label, so adding randomness
//! to one strategy never shifts the draws seen by another.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamLabel {
    Filler,
    Emptier,
    Offsets,
}

impl StreamLabel {
    fn id(self) -> u64 {
        match self {
            StreamLabel::Filler => 1,
            StreamLabel::Emptier => 2,
            StreamLabel::Offsets => 3,
        }
    }
}

pub type GameRng = ChaCha8Rng;

pub fn stream(seed: u64, label: StreamLabel) -> GameRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label.id());
    rng
}

/// Uniform dyadic sample `k / 2^64` in `[0, 1)`.
pub fn dyadic_unit(rng: &mut impl RngCore) -> Rational {
    Rational::dyadic64(rng.next_u64())
}

/// Uniform index in `0..len`.
pub fn index(rng: &mut impl RngCore, len: usize) -> usize {
    rng.gen_range(0..len)
}
