//! Seed derivation for reproducible, order-independent runs.
//!
//! Every run, fold and sub-step draws from its own generator whose seed is a
//! pure function of the master seed and a stream index, so results do not
//! depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master.wrapping_add(GOLDEN.wrapping_mul(stream.wrapping_add(1))))
}

/// Named sub-streams of a run seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    Split = 0x51,
    Drops = 0xD5,
    Learner = 0x1E,
    Noise = 0x2A,
    Simulation = 0x5A,
}

pub fn sub_seed(seed: u64, stream: Stream) -> u64 {
    derive_seed(seed, stream as u64)
}

pub fn rng_from(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}
