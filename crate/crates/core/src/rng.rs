//! Counter-based random streams.
//!
//! Every draw comes from a ChaCha8 stream. A stream is addressed by a 256-bit
//! key expanded from a [`SeedKey`] plus a 64-bit stream id (the replica
//! index); inside a replica the ChaCha block counter advances with the step
//! index. The same `(master seed, purpose path, replica)` triple therefore
//! yields the same numbers regardless of which worker thread runs it or in
//! which order replicas are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used for all simulation streams.
pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hierarchical seed. Children are derived by hashing, never by drawing from
/// a parent generator, so sibling streams are independent of evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeedKey(u64);

impl SeedKey {
    pub const fn new(master: u64) -> Self {
        SeedKey(master)
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    /// Child key for a named purpose (stage, estimator, ...).
    pub fn derive(self, tag: &str) -> Self {
        // FNV-1a over the tag, then mixed with the parent.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in tag.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        SeedKey(mix64(self.0 ^ mix64(h)))
    }

    /// Child key for an integer index.
    pub fn child(self, index: u64) -> Self {
        SeedKey(mix64(self.0.rotate_left(17) ^ mix64(index.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    /// The stream for one replica.
    pub fn stream(self, replica: u64) -> StreamRng {
        let mut seed = [0u8; 32];
        let mut z = self.0;
        for chunk in seed.chunks_exact_mut(8) {
            z = mix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(replica);
        rng
    }
}
