//! Keyed random substreams.
//!
//! A [`RandomStream`] is a ChaCha8 keystream whose 256-bit key is a hash of
//! the root seed and a tuple of labels, e.g. `(seed, STRAGGLERS, trial,
//! iteration)`. Two streams with different label tuples are independent, and
//! a given stream never depends on how many other streams were drawn before
//! it, so per-device and per-trial work can run in any order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Domain labels for the substreams used by the simulator.
pub mod domain {
    pub const TASK: u64 = 1;
    pub const ALLOCATION: u64 = 2;
    pub const THETA0: u64 = 3;
    pub const STRAGGLERS: u64 = 4;
    pub const COMPRESSOR: u64 = 5;
    pub const PROBE: u64 = 6;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    /// Root stream for `seed` with no labels.
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, &[])
    }

    /// Stream keyed by `(seed, labels...)`.
    pub fn derive(seed: u64, labels: &[u64]) -> Self {
        let mut key = [0u8; 32];
        // four independent lanes, each a hash chain over the full label tuple
        for (lane, chunk) in key.chunks_exact_mut(8).enumerate() {
            let mut h = splitmix64(seed ^ (lane as u64).wrapping_mul(GOLDEN));
            h = splitmix64(h ^ labels.len() as u64);
            for &l in labels {
                h = splitmix64(h ^ l);
            }
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        Self {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }

    /// `true` with probability `p`. `p <= 0` never fires, `p >= 1` always does.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// `amount` distinct indices from `0..len`, uniformly without replacement.
    pub fn sample_indices(&mut self, len: usize, amount: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, len, amount).into_vec()
    }

    pub fn normal_vector(&mut self, len: usize, mean: f64, std_dev: f64) -> Vec<f64> {
        (0..len).map(|_| self.normal(mean, std_dev)).collect()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
