//! Seeded, splittable random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is expanded from
//! `origin_seed` (the `rand_core` `seed_from_u64` expansion) and whose 64-bit
//! ChaCha stream word is `stream_id`. The pair `(origin_seed, stream_id)`
//! therefore pins the whole draw sequence.
//!
//! Child streams are derived by hashing a label: the child key seed is
//! `splitmix64(origin_seed ^ splitmix64(stream_id))` and the child stream word
//! is the FNV-1a 64-bit hash of the label. Adding a new label never perturbs
//! the draws of an existing one.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A deterministic random stream identified by `(origin_seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
    origin_seed: u64,
    stream_id: u64,
}

/// Creates the stream for `(seed, stream_id)`.
pub fn seeded_stream(seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(seed, stream_id)
}

impl RngStream {
    pub fn new(origin_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(origin_seed);
        inner.set_stream(stream_id);
        RngStream {
            inner,
            origin_seed,
            stream_id,
        }
    }

    pub fn origin_seed(&self) -> u64 {
        self.origin_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream keyed by a string label. Independent of how many draws
    /// have been taken from `self`.
    pub fn derive(&self, label: &str) -> RngStream {
        self.derive_id(fnv1a64(label.as_bytes()))
    }

    /// Child stream keyed by an integer label.
    pub fn derive_id(&self, label: u64) -> RngStream {
        let child_seed = splitmix64(self.origin_seed ^ splitmix64(self.stream_id));
        RngStream::new(child_seed, label)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Standard Laplace draw (location 0, scale 1) by inversion.
    pub fn standard_laplace(&mut self) -> f64 {
        let u = self.uniform() - 0.5;
        -u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// Uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

/// SplitMix64 finaliser (Steele, Lea and Flood constants).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}
