//! Seeded random streams.
//!
//! Every independent consumer of randomness (an agent in a run, a chunk of a
//! Monte-Carlo ensemble) gets its own ChaCha8 stream, keyed by the master
//! seed, a run id and a stream id.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

pub fn stream_rng(master_seed: u64, run_id: u64, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&run_id.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng
}
