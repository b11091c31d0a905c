//! Data-parallel map over grid indices.
//!
//! Every expensive sweep in this crate (field maps, capacity maps) is a pure
//! function of the grid index, so parallelism is a drop-in `rayon` par_iter
//! over `0..len`. With the `parallel` feature disabled the same entry point
//! runs sequentially; results are bit-identical either way because each index
//! computes independently and lands in its own slot.

use crate::error::Result;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..len`, collecting into a Vec and propagating the first
/// error (by index order) if any evaluation fails.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(len: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = (0..len).into_par_iter().map(f).collect();
    results.into_iter().collect()
}

/// Sequential build: same contract as the parallel version.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(len: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed_seq(len, f)
}

/// Always-sequential map with the same contract as [`map_indexed`]; kept
/// available in every build so the two strategies can be benchmarked against
/// each other.
pub fn map_indexed_seq<T, F>(len: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Pin the process-global worker pool to `n` threads. May only be called
/// once, before any parallel map has run; later calls fail because the pool
/// is already built. Worker count never affects results, only wall time.
#[cfg(feature = "parallel")]
pub fn configure_workers(n: usize) -> Result<()> {
    use crate::error::Error;
    if n == 0 {
        return Err(Error::Validation("worker count must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("worker pool already configured: {e}")))
}

/// Sequential build: there is no pool, so any requested count is accepted
/// and ignored (everything runs on the calling thread).
#[cfg(not(feature = "parallel"))]
pub fn configure_workers(n: usize) -> Result<()> {
    use crate::error::Error;
    if n == 0 {
        return Err(Error::Validation("worker count must be >= 1".into()));
    }
    Ok(())
}
