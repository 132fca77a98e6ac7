//! Seeded random streams.
//!
//! Every random draw in the crate goes through ChaCha8 keyed by a `u64` seed
//! and a stream id, so results are identical across platforms and independent
//! consumers of the same seed never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids for the different consumers of a seed.
pub mod stream {
    pub const GRAPH: u64 = 1;
    pub const FEATURES: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const MASKS: u64 = 5;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
