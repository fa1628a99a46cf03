//! Seeded random streams.
//!
//! Every consumer of randomness draws from a ChaCha20 stream addressed by
//! `(seed, purpose, index)`. The seed and purpose form the cipher key and the
//! index selects one of the 2^64 non-overlapping streams of that key, so two
//! distinct addresses never share keystream.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Purpose labels for the streams used across the crate.
pub mod purpose {
    pub const TRUE_KEY: u64 = 1;
    pub const FALSE_KEY: u64 = 2;
    pub const CLONE: u64 = 3;
    pub const VERIFY: u64 = 4;
    pub const ENROLL: u64 = 5;
    pub const FALSE_VERIFY: u64 = 6;
    pub const CLONE_VERIFY: u64 = 7;
    pub const COVERAGE: u64 = 8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, purpose: u64, index: u64) -> StreamRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&purpose.to_le_bytes());
        key[16..24].copy_from_slice(b"cvpufstm");
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }

    /// A derived family of streams, independent of the parent's.
    pub fn child(&self, label: u64) -> Streams {
        Streams { seed: splitmix64(self.seed ^ splitmix64(label.wrapping_add(0x5bd1_e995))) }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_address_same_stream() {
        let s = Streams::new(42);
        let (mut a, mut b) = (s.rng(1, 7), s.rng(1, 7));
        for _ in 0..8 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn distinct_addresses_differ() {
        let s = Streams::new(42);
        let first = |mut r: StreamRng| -> u64 { r.random() };
        let base = first(s.rng(1, 0));
        assert_ne!(base, first(s.rng(1, 1)));
        assert_ne!(base, first(s.rng(2, 0)));
        assert_ne!(base, first(Streams::new(43).rng(1, 0)));
        assert_ne!(base, first(s.child(1).rng(1, 0)));
    }
}
