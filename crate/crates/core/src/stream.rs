//! Seeded random substreams.
//!
//! Every parallelizable loop (EM starts, bootstrap replicates, trial arms)
//! draws from its own ChaCha stream keyed by `(seed, index)`, so results do not
//! depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
