//! Hierarchical RNG streams.
//!
//! Every random draw in a solve is addressed by a [`SeedPath`]: a root seed
//! plus a list of labels (iteration number, sample kind, ...). Two draws with
//! the same path always see the same random bits, independent of how many
//! other draws happened before, which is what makes traces bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPath {
    root: u64,
    labels: Vec<u64>,
}

impl SeedPath {
    pub fn new(root: u64) -> Self {
        Self { root, labels: Vec::new() }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Extends the path by one label.
    pub fn child(&self, label: u64) -> Self {
        let mut labels = self.labels.clone();
        labels.push(label);
        Self { root: self.root, labels }
    }

    /// Folds root and labels into a single 64-bit seed.
    pub fn seed(&self) -> u64 {
        let mut state = splitmix64(self.root ^ 0x5354_5241_5243_0001);
        for &label in &self.labels {
            state = splitmix64(state ^ splitmix64(label.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        }
        state
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
