//! Seed derivation for independent, reproducible random streams.
//!
//! Every stochastic component (synthetic data, weight init, batch shuffling,
//! dropout masks) owns a `ChaCha8Rng` seeded through [`derive_seed`]. Streams
//! derived with different tags are independent, and a stream's output depends
//! only on the base seed and its tags, never on program order. That makes
//! results identical whether work runs serially or on a worker pool.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Keep values stable: changing one changes every derived stream.
pub mod tag {
    pub const SYNTH_STATE: u64 = 0x01;
    pub const INIT: u64 = 0x02;
    pub const SHUFFLE: u64 = 0x03;
    pub const DROPOUT: u64 = 0x04;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes a base seed with a list of tags into a new 64-bit seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(base);
    for &t in tags {
        acc = splitmix64(acc ^ splitmix64(t));
    }
    acc
}

/// A ChaCha stream for `(base, tags)`. ChaCha8 is portable: the same seed
/// produces the same bytes on every platform and release.
pub fn stream(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}
