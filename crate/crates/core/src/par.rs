//! Order-preserving map helpers.
//!
//! With the `parallel` feature these fan out over the current rayon pool;
//! without it they are plain sequential loops. Every closure is evaluated
//! exactly once per index and results come back in index order, so both
//! builds produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps over fixed-size chunks of a flat slice (one chunk per point).
pub fn map_chunks<T, F>(data: &[f64], chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_exact(chunk).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_exact(chunk).map(f).collect()
    }
}

/// Number of worker threads the helpers will use.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
