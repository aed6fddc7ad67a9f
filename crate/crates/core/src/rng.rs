//! Counter-based random streams.
//!
//! Every consumer of randomness (dataset generation, weight init, batch
//! sampling, each solver call) draws from its own ChaCha stream keyed by the
//! root seed and a stream id, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the fixed consumers in a training run.
pub mod streams {
    pub const DATASET: u64 = 1;
    pub const INIT: u64 = 2;
    pub const BATCHES: u64 = 3;
    pub const CORPUS: u64 = 4;
    pub const SOLVER_BASE: u64 = 1 << 32;
}

/// A ChaCha8 generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer, used to fold indices into stream or seed ids.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a parent id with a child index into a new id.
pub fn derive(parent: u64, child: u64) -> u64 {
    mix(parent ^ mix(child))
}
