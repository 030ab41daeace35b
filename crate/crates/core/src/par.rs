//! Element-parallel map with a sequential fallback when the `parallel` feature is off.

use crate::error::Result;

#[cfg(feature = "parallel")]
pub fn try_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Whether element work is dispatched to a thread pool in this build.
pub const PARALLEL: bool = cfg!(feature = "parallel");
