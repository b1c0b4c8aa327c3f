//! Bounded parallel map over independent work items.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Applies `job` to every item on a pool of `workers` threads. Results keep the
/// order of `items` whatever the worker count.
pub fn sweep<T, R, F>(items: &[T], workers: usize, job: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if workers == 0 {
        return Err(Error::invalid("workers", "must be >= 1"));
    }
    if workers == 1 {
        return Ok(items.iter().map(job).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(job).collect()))
}
