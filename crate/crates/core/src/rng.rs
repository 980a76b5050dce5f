//! Seed derivation shared by every randomized stage.
//!
//! All streams are ChaCha8 keyed by a 64-bit seed plus a stream id, so pattern
//! expansion and per-image noise never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// SplitMix64 finalizer; used to derive child seeds.
pub(crate) fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
