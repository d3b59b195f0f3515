//! Reproducible random streams.
//!
//! All experiments use ChaCha8 from `rand_chacha`. A substream is the
//! generator seeded from the master seed with its 64-bit stream id set to the
//! replicate index; ChaCha streams with distinct ids are independent keystreams
//! of the same key, so replicate `i` sees the same numbers no matter which
//! worker runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Human-readable description of the generator, recorded in run manifests.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.3); substream(seed, i) = seed_from_u64(seed) with stream id i";

pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
