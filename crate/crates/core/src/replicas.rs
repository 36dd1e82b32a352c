//! Replica orchestration: independent seeds, parallel evaluation, results in
//! replica-index order.

use rayon::prelude::*;

use crate::rng::replica_seed;

/// Seeds `replica_seed(base, i)` for `i < count`.
pub fn seed_schedule(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| replica_seed(base, i)).collect()
}

/// Evaluates `f(index, seed)` for every replica in parallel and returns the
/// results in index order.
pub fn run_replicas<T, F>(base: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(i, replica_seed(base, i as u64)))
        .collect()
}
