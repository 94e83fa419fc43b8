//! Counter-keyed random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha8 stream whose key is
//! `(seed, domain, index)` and whose stream id selects a lane such as the
//! objective. Draws never depend on how many numbers an earlier draw consumed,
//! so a masked draw reproduces exactly the columns of the full draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps unrelated draws independent under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    GradientNoise = 1,
    ObjectiveMask = 2,
    Pcgrad = 3,
    ProblemData = 4,
}

pub fn stream(seed: u64, domain: Domain, index: u64, lane: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(lane);
    rng
}
