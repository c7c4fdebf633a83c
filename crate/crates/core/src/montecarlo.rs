//! Shared plumbing for seeded, sharded Monte Carlo runs.
//!
//! A run of `rounds` draws is split into a fixed number of shards. Shard `i`
//! draws from ChaCha8 seeded with `seed` on stream `i`, so its output does not
//! depend on which worker executes it. Partials are merged in shard order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Generator used by every Monte Carlo routine, recorded in reports.
pub const RNG_ALGORITHM: &str = "ChaCha8 (seed_from_u64, stream = shard index)";

pub const DEFAULT_SHARDS: usize = 16;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

pub fn shard_rng(seed: u64, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    rng
}

/// Round counts per shard; the remainder goes to the leading shards.
pub fn split_rounds(rounds: u64, shards: usize) -> Vec<u64> {
    let shards = shards.max(1) as u64;
    let base = rounds / shards;
    let extra = rounds % shards;
    (0..shards).map(|i| base + u64::from(i < extra)).collect()
}

/// Run `work(shard_index, rounds, rng)` for every shard in parallel and return
/// the partials in shard order.
pub fn run_shards<A, W>(rounds: u64, shards: usize, seed: u64, work: W) -> Vec<A>
where
    A: Send,
    W: Fn(usize, u64, &mut ChaCha8Rng) -> A + Sync,
{
    split_rounds(rounds, shards)
        .into_par_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut rng = shard_rng(seed, i);
            work(i, r, &mut rng)
        })
        .collect()
}

/// Streaming mean and variance (Welford), mergeable across shards (Chan et al.).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn half_width_95(&self) -> f64 {
        Z95 * self.std_error()
    }
}
