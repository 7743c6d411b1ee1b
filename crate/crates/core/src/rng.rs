//! Seedable, splittable random streams.
//!
//! Every replication of an experiment owns a stream derived from
//! `(seed, replication index)`: the index selects one of the 2^64 independent
//! ChaCha8 streams under the same key. Nested work that needs its own
//! randomness calls [`RandomStream::fork`].

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    seed: u64,
    index: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::for_replication(seed, 0)
    }

    pub fn for_replication(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        RandomStream { rng, seed, index }
    }

    /// Splits off a child stream keyed by 256 bits drawn from this one.
    pub fn fork(&mut self) -> RandomStream {
        let mut key = [0u8; 32];
        self.rng.fill_bytes(&mut key);
        RandomStream {
            rng: ChaCha8Rng::from_seed(key),
            seed: self.seed,
            index: self.index,
        }
    }

    /// Master seed this stream (or its ancestor) was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replication(&self) -> u64 {
        self.index
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
