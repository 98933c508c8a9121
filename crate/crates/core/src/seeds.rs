//! Seed derivation for reproducible, order-independent sampling.
//!
//! Every random object (an instance, a batch of initial choices) gets its own
//! seed computed from `(base, stream, index)` by a SplitMix64 finalizer, and is
//! then generated from a fresh ChaCha8 stream. Any instance can therefore be
//! regenerated without generating the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep training, held-out and choice sampling disjoint.
pub mod stream {
    pub const INSTANCES: u64 = 0x1;
    pub const TRAINING: u64 = 0x2;
    pub const HELD_OUT: u64 = 0x3;
    pub const CHOICES: u64 = 0x4;
    pub const RESTARTS: u64 = 0x5;
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
