//! Deterministic random streams and the shared common-noise path.
//!
//! Every stream is a ChaCha8 keystream keyed by the replica seed and selected
//! by a 64-bit stream id, so particle `i` draws the same numbers whatever the
//! ensemble size or worker count.

use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LabError, Result};

const COMMON_STREAM: u64 = u64::MAX;
const BOOTSTRAP_STREAM: u64 = u64::MAX - 1;
const BRIDGE_BASE: u64 = 1 << 48;

/// One standard normal draw.
#[inline]
pub fn normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// SplitMix64 finalizer applied to `(master, index)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn keyed(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn particle_stream(replica_seed: u64, index: usize) -> ChaCha8Rng {
    keyed(replica_seed, index as u64)
}

/// Extra draws used only when a run is refined in time.
pub fn bridge_stream(replica_seed: u64, index: usize) -> ChaCha8Rng {
    keyed(replica_seed, BRIDGE_BASE + index as u64)
}

pub fn common_stream(replica_seed: u64) -> ChaCha8Rng {
    keyed(replica_seed, COMMON_STREAM)
}

pub fn bootstrap_stream(seed: u64) -> ChaCha8Rng {
    keyed(seed, BOOTSTRAP_STREAM)
}

/// Increments of the common Brownian motion `B` on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPaths {
    d: usize,
    dt: f64,
    increments: Vec<f64>,
}

impl BrownianPaths {
    /// Draw `steps` increments `~ N(0, dt I_d)` from the replica's common stream.
    pub fn generate(replica_seed: u64, d: usize, dt: f64, steps: usize) -> Self {
        let mut rng = common_stream(replica_seed);
        let sd = dt.sqrt();
        let increments = (0..steps * d)
            .map(|_| sd * normal(&mut rng))
            .collect::<Vec<f64>>();
        Self { d, dt, increments }
    }

    /// Zero path, for deterministic runs.
    pub fn zero(d: usize, dt: f64, steps: usize) -> Self {
        Self {
            d,
            dt,
            increments: vec![0.0; steps * d],
        }
    }

    pub fn from_increments(d: usize, dt: f64, increments: Vec<f64>) -> Result<Self> {
        if d == 0 || !increments.len().is_multiple_of(d) {
            return Err(LabError::InvalidInput(format!(
                "{} increments do not split into {d}-vectors",
                increments.len()
            )));
        }
        Ok(Self { d, dt, increments })
    }

    /// Pairwise sums: the same path observed at twice the step.
    pub fn coarsen(&self) -> Result<Self> {
        let steps = self.steps();
        if !steps.is_multiple_of(2) {
            return Err(LabError::InvalidInput(format!(
                "cannot coarsen a path with an odd number of steps ({steps})"
            )));
        }
        let d = self.d;
        let mut out = Vec::with_capacity(self.increments.len() / 2);
        for j in 0..steps / 2 {
            for a in 0..d {
                out.push(self.increments[2 * j * d + a] + self.increments[(2 * j + 1) * d + a]);
            }
        }
        Ok(Self {
            d,
            dt: 2.0 * self.dt,
            increments: out,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.d
    }

    pub fn increment(&self, j: usize) -> &[f64] {
        &self.increments[j * self.d..(j + 1) * self.d]
    }

    /// `B_t` at step `j` (sum of the first `j` increments).
    pub fn value_at(&self, j: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.d];
        for s in 0..j {
            for (ba, inc) in b.iter_mut().zip(self.increment(s)) {
                *ba += inc;
            }
        }
        b
    }

    /// Hash of the increment bit patterns, logged to certify coupling.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.d.hash(&mut h);
        self.dt.to_bits().hash(&mut h);
        for x in &self.increments {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }
}
