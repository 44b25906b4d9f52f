//! Seeded random streams.
//!
//! Every run draws from `stream(master_seed, run_index)`: a ChaCha20 generator
//! keyed by the master seed and positioned on its own 64-bit stream, so runs never
//! share or overlap random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Stream = ChaCha20Rng;

pub fn stream(master_seed: u64, run_index: u64) -> Stream {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index);
    rng
}

/// Single-stream shortcut for tests and one-off problems.
pub fn seeded(seed: u64) -> Stream {
    stream(seed, 0)
}
