//! Counter-based noise streams.
//!
//! Every random draw is addressed by `(seed, trajectory, step, draw)` plus a
//! domain tag. The ChaCha key carries `(seed, trajectory, domain)`, the stream
//! id carries `step`, and each draw index owns a disjoint 2^32-word window of
//! the keystream. Draws therefore do not depend on evaluation order, which
//! keeps ensembles reproducible under any worker count and lets compared
//! optimizers share their noise exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Separates independent uses of the same `(seed, trajectory, step)` address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u64)]
pub enum Domain {
    Gradient = 0,
    Init = 1,
    Brownian = 2,
    Bootstrap = 3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseKey {
    pub seed: u64,
    pub trajectory: u64,
    pub step: u64,
}

impl NoiseKey {
    pub fn new(seed: u64, trajectory: u64, step: u64) -> Self {
        Self {
            seed,
            trajectory,
            step,
        }
    }

    pub fn at_step(self, step: u64) -> Self {
        Self { step, ..self }
    }

    /// Generator positioned at the start of the window for `draw`.
    pub fn stream(&self, domain: Domain, draw: u32) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.trajectory.to_le_bytes());
        key[16..24].copy_from_slice(&(domain as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.step);
        rng.set_word_pos(u128::from(draw) << 32);
        rng
    }

    /// Fills `out` with i.i.d. standard normals for the given draw.
    pub fn fill_normal(&self, domain: Domain, draw: u32, out: &mut [f64]) {
        let mut rng = self.stream(domain, draw);
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }
}

/// Provenance of one oracle draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub seed: u64,
    pub trajectory: u64,
    pub step: u64,
    pub draw: u32,
}
