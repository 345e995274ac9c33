//! Seeded random streams.
//!
//! Every replicate draws from its own ChaCha8 stream: the 64-bit seed keys
//! the generator and the replicate number selects the stream, so streams
//! can be created in any order on any worker.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Name of the generator, embedded in artifacts.
pub const GENERATOR: &str = "chacha8/rand_chacha-0.9/stream=replicate";

pub fn replicate_rng(seed: u64, replicate: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}
