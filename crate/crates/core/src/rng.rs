//! Reproducible random streams.
//!
//! Everything stochastic in this crate draws from ChaCha8 streams derived
//! from a master seed. Replicate `r` of a batch uses stream `r` of the same
//! keyed generator, so replicate batches can be computed in parallel, in any
//! order, with bit-identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for a single run with the given seed.
pub fn master_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for replicate `index` of a batch keyed by `seed`.
///
/// Uses the ChaCha stream counter as a splittable index: streams are
/// statistically independent and stable across platforms and thread counts.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}
