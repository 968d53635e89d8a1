//! Deterministic derivation of independent random streams.
//!
//! Every stream is keyed by `(master seed, replicate index, stream id)`. The
//! first two are folded into a ChaCha seed with SplitMix64 finalizers and the
//! stream id selects a ChaCha stream, so streams never overlap and do not
//! depend on the order in which they are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child of `parent`.
#[inline]
pub fn child_seed(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn stream_rng(master: u64, replicate: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(master, replicate));
    rng.set_stream(stream);
    rng
}
