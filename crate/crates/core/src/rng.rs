//! Named, seeded random streams.
//!
//! Every consumer of randomness derives its generator from the root seed, a
//! stream name and a small tuple of indices (sentence id, epoch, ...). Two
//! features drawing from different streams can never perturb each other, and
//! per-sentence streams make the draws independent of iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const MASK: &str = "mask";
pub const CORRUPT: &str = "corrupt";
pub const INIT: &str = "init";
pub const SAMPLE: &str = "sample";
pub const FOLDS: &str = "folds";
pub const SHUFFLE: &str = "shuffle";
pub const DROPOUT: &str = "dropout";
pub const SYNTH: &str = "synth";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    root: u64,
}

impl SeedStreams {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn seed(&self, stream: &str, indices: &[u64]) -> u64 {
        let mut state = splitmix(self.root ^ fnv1a(stream.as_bytes()));
        for &ix in indices {
            state = splitmix(state ^ splitmix(ix.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        state
    }

    pub fn rng(&self, stream: &str, indices: &[u64]) -> StreamRng {
        StreamRng::seed_from_u64(self.seed(stream, indices))
    }
}

/// 64-bit FNV-1a, stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
