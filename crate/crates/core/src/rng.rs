//! Reproducible random streams.
//!
//! Every Monte Carlo unit of work (one trajectory, one continuation batch)
//! draws from its own ChaCha8 stream keyed by `(master_seed, index)`, so
//! results never depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

/// Identifies the random stream a trajectory consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub stream: u64,
}

impl SeedInfo {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        Self {
            master_seed,
            stream,
        }
    }

    pub fn rng(&self) -> StreamRng {
        stream_rng(self.master_seed, self.stream)
    }
}

pub fn stream_rng(master_seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Trajectories per work unit in parallel ensembles. Fixed so that the
/// floating-point summation order never depends on the thread count.
pub(crate) const CHUNK: usize = 16;

/// Maps `f` over `0..count` in fixed-size chunks on the rayon pool and folds
/// the chunk results with `merge` in chunk order.
pub(crate) fn ordered_chunks<A, F, M>(count: usize, f: F, mut merge: M)
where
    A: Send,
    F: Fn(std::ops::Range<usize>) -> A + Sync,
    M: FnMut(A),
{
    use rayon::prelude::*;
    let chunks: Vec<std::ops::Range<usize>> = (0..count)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(count))
        .collect();
    let wave = 2 * rayon::current_num_threads().max(1);
    for group in chunks.chunks(wave) {
        let results: Vec<A> = group.par_iter().map(|r| f(r.clone())).collect();
        for r in results {
            merge(r);
        }
    }
}
