//! Keyed random streams for reproducible parallel Monte Carlo.
//!
//! Work is cut into fixed-size blocks of item indices. Block `b` always draws
//! from ChaCha8 stream `b` under the run seed, so results do not depend on how
//! blocks are distributed across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Items (trials or samples) per keyed block.
pub const BLOCK_LEN: usize = 1024;

pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Half-open index ranges of the blocks covering `0..n`.
pub fn blocks(n: usize) -> impl Iterator<Item = (u64, std::ops::Range<usize>)> + Clone {
    (0..n.div_ceil(BLOCK_LEN)).map(move |b| (b as u64, b * BLOCK_LEN..((b + 1) * BLOCK_LEN).min(n)))
}
