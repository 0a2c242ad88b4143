//! Deterministic per-trial random streams.
//!
//! Every random quantity is drawn from a ChaCha8 generator whose 256-bit seed
//! is derived from `(master seed, stream index, purpose)` through SplitMix64.
//! Streams depend only on that triple, so the order in which trials run (or
//! how many run at once) never changes a draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for within one trial. Distinct purposes never share
/// a stream, e.g. the initial matrix and the Gaussian flow target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Entries = 1,
    FlowTarget = 2,
    TracyWidom = 3,
    Auxiliary = 4,
}

/// SplitMix64 finalizer (Steele, Lea & Flood).
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// 64-bit key of the stream for `(seed, index, purpose)`.
pub fn stream_key(seed: u64, index: u64, purpose: Purpose) -> u64 {
    let a = splitmix64(seed);
    let b = splitmix64(a ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(b ^ (purpose as u64).wrapping_mul(0xAEF1_7502_108E_F2D9))
}

pub fn stream(seed: u64, index: u64, purpose: Purpose) -> StreamRng {
    let mut key = stream_key(seed, index, purpose);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        key = splitmix64(key);
        chunk.copy_from_slice(&key.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Fresh master seed from system entropy, for runs without `--seed`.
pub fn entropy_seed() -> u64 {
    rand::random()
}
