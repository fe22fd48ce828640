//! Keyed random streams.
//!
//! Every random draw in the crate comes from a stream identified by
//! `(master seed, trial index, stream id)`. The stream is a ChaCha8
//! keystream: the key is derived from the master seed and trial index, the
//! ChaCha stream word carries the stream id, and the block counter advances
//! internally. Two runs with the same key produce identical draws no matter
//! how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used across the crate. Distinct ids give independent streams
/// for the same trial.
pub mod streams {
    pub const STEPS: u64 = 0;
    pub const SAMPLING: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const CHAIN: u64 = 3;
    pub const CERTIFY: u64 = 4;
}

/// SplitMix64 finalizer. A bijective 64-bit mixer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of a seed together with a list of 64-bit words.
#[inline]
pub fn keyed_hash(seed: u64, words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = mix64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for w in words {
        h = mix64(h ^ w.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    h
}

/// The generator for `(master, trial, stream)`.
pub fn stream_rng(master: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        let word = keyed_hash(master, [trial, i as u64]);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng
}
