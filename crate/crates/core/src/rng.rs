//! Counter-based random streams keyed by (master seed, replicate, tag).
//!
//! Each stream is a ChaCha8 keystream: the 256-bit key is expanded from
//! the master seed and a tag (window, axis or purpose), and the 64-bit
//! ChaCha stream id is the replicate index. Streams never depend on the
//! order in which they are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replicate: u64,
    pub tag: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replicate: u64, tag: u64) -> Self {
        StreamKey { seed, replicate, tag }
    }

    /// Same seed and replicate, different tag.
    pub fn with_tag(self, tag: u64) -> Self {
        StreamKey { tag, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed ^ self.tag.wrapping_mul(0xD1B5_4A32_D192_ED03);
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.replicate);
        rng
    }
}

/// Tags separating the purposes a stream is drawn for.
pub mod tags {
    /// Gaussian field weights; the window index is added.
    pub const FIELD: u64 = 0x1000;
    /// Random-volatility multiplier.
    pub const VOLATILITY: u64 = 0x2000;
    /// Hermite-oracle weights.
    pub const ORACLE: u64 = 0x3000;
    /// Cholesky-backend weights.
    pub const DENSE: u64 = 0x4000;
}
