//! Seeded random substreams.
//!
//! Every run derives its randomness from one seed. Independent concerns draw
//! from separate ChaCha streams so, for example, changing the batch order
//! never changes weight initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Noise = 3,
    State = 4,
    Data = 5,
    /// Synthetic task generation, kept apart from split sampling.
    Synth = 6,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
