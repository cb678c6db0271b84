//! Named random substreams.
//!
//! A single user seed feeds every experiment; each consumer draws from its own
//! ChaCha stream so that, e.g., changing the bootstrap count never perturbs the
//! train/test split.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    Bootstrap = 2,
    Regret = 3,
    Sparsify = 4,
    Synth = 5,
}

/// Generator for `(seed, stream, index)`; distinct triples give independent streams.
pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 56) ^ index);
    rng
}
