//! Thin switch between rayon and plain loops.
//!
//! Every kernel in this crate funnels its outer loop through one of these
//! helpers. Each output element is produced by exactly one closure call with
//! a fixed inner summation order, so results are bitwise identical whatever
//! the thread count — including the sequential build with the `parallel`
//! feature disabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Splits `data` into consecutive `size`-element chunks and runs `f` on each,
/// passing the chunk index.
pub fn for_each_chunk<T, F>(data: &mut [T], size: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    debug_assert!(size > 0);
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(size)
        .enumerate()
        .for_each(|(i, chunk)| f(i, chunk));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(size)
        .enumerate()
        .for_each(|(i, chunk)| f(i, chunk));
}

/// Collects `f(0), f(1), ..., f(n-1)` preserving index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
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

/// Caps the global worker pool at `threads`. Call before any parallel work;
/// later calls are ignored once the pool exists. No-op in sequential builds.
pub fn set_thread_cap(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Reads the `AAMS_THREADS` cap from the environment, if set and valid.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var("AAMS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
}
