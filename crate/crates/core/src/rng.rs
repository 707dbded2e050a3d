//! Seeded random streams.
//!
//! A run owns a single seed. Each consumer draws from its own ChaCha stream so
//! that, for example, changing the particle count does not perturb the sensor
//! noise sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    SensorNoise = 1,
    ParticleInit = 2,
    WeightInit = 3,
}

pub fn stream(seed: u64, which: Stream) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
