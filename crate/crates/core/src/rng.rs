//! Counter-based random streams.
//!
//! Every random draw in the pipeline is keyed by `(seed, stream, a, b)` so
//! per-pixel work can run in any order and still reproduce exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named streams so unrelated consumers never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ShortNoise = 1,
    EventNoise = 2,
    Degradation = 3,
    SampleSeed = 4,
    Crop = 5,
    Init = 6,
    Shuffle = 7,
    Scene = 8,
    Test = 99,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a seed with a stream id and two counters.
pub fn mix(seed: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut h = splitmix(seed);
    h = splitmix(h ^ stream as u64);
    h = splitmix(h ^ a.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix(h ^ b.wrapping_mul(0xA076_1D64_78BD_642F))
}

pub fn keyed(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream, a, b))
}

/// Per-pixel generator for pixel `(x, y)`.
pub fn pixel(seed: u64, stream: Stream, x: usize, y: usize) -> ChaCha8Rng {
    keyed(seed, stream, x as u64, y as u64)
}
