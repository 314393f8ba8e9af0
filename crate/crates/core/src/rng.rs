//! Reproducible per-trial random number generators.
//!
//! Every Monte Carlo trial draws from its own ChaCha8 stream, selected by the
//! trial index, under a key derived from the master seed. Trial `i` therefore
//! sees the same numbers no matter how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the crate.
pub type TrialRng = ChaCha8Rng;

/// Generator for trial `index` under `master_seed`.
pub fn trial_rng(master_seed: u64, index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent master seed for one cell of an experiment grid.
pub fn cell_seed(master_seed: u64, cell: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(cell.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
