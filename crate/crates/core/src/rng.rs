//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by the caller's
//! seed and a fixed stream id for its purpose. Two quantities built from the
//! same seed (say an ensemble and its noise) therefore never share draws, and
//! the draws of one trial do not depend on which thread or in which order the
//! trial runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_ENSEMBLE: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_SIGNAL: u64 = 3;
pub const STREAM_POWER: u64 = 16;

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
