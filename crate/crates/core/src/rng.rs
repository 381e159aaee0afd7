//! Seed splitting.
//!
//! One user-facing seed fans out into independent ChaCha streams, one per
//! consumer, so adding a consumer never perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Deterministic generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
