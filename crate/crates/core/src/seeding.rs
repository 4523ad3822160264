//! Deterministic derivation of independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a tuple of integers into one seed. Order-sensitive.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Stream labels keep the different consumers of one global seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Rollout = 2,
    Predictor = 3,
    Stats = 4,
    Validation = 5,
    Evaluation = 6,
    Normalization = 7,
    Update = 8,
}

pub fn stream_rng(global_seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(&[global_seed, stream as u64, a, b]))
}
