//! Seeded random substreams.
//!
//! One master seed feeds every run. Each consumer (customer arrivals,
//! purchase events, exploration, Monte Carlo cells) gets its own ChaCha
//! stream id, so draws in one never shift draws in another. Two agents
//! that share a seed therefore see the same customers and the same
//! purchase coin flips.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Customers = 1,
    Purchases = 2,
    Exploration = 3,
    MonteCarlo = 4,
    Histogram = 5,
}

/// Independent generator for `stream` under `seed`.
pub fn substream(seed: u64, stream: Stream) -> SimRng {
    indexed_substream(seed, stream, 0)
}

/// Like [`substream`] but further split by `index` (e.g. one per oracle cell).
pub fn indexed_substream(seed: u64, stream: Stream, index: u32) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | u64::from(index));
    rng
}
