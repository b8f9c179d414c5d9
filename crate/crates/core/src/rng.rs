//! Counter-based random streams.
//!
//! Every stream is addressed by a path of words starting at the root seed,
//! e.g. `(seed, channel, draw)`. Draw `j` never depends on draws `0..j`,
//! so parallel and sequential evaluation see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream tags. Distinct tags give unrelated streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u64)]
pub enum Channel {
    Beta = 1,
    Case = 2,
    Move = 3,
    Accept = 4,
    Calibrate = 5,
    Bank = 6,
    Restart = 7,
    Confirm = 8,
    Bootstrap = 9,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededSampler {
    root: u64,
}

impl SeededSampler {
    pub fn new(root_seed: u64) -> Self {
        Self { root: root_seed }
    }

    pub fn root_seed(&self) -> u64 {
        self.root
    }

    /// A sampler whose root is derived from this one, for nesting
    /// independent runs (restarts, matrix cells) under one seed.
    pub fn fork(&self, label: u64) -> Self {
        Self {
            root: derive(&[self.root, Channel::Restart as u64, label]),
        }
    }

    /// Generator for `(channel, index)`.
    pub fn stream(&self, channel: Channel, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive(&[self.root, channel as u64, index]))
    }

    /// Generator for `(channel, outer, inner)`, e.g. step and sample.
    pub fn stream2(&self, channel: Channel, outer: u64, inner: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive(&[self.root, channel as u64, outer, inner]))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x6A09_E667_F3BC_C908, |h, &w| splitmix64(h ^ splitmix64(w)))
}
