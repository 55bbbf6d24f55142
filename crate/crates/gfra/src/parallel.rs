//! Data-parallel map with a sequential fallback.
//!
//! `map_indexed(count, threads, f)` evaluates `f(0..count)` and returns the
//! results in index order. With the `parallel` feature it fans out over a
//! rayon pool (`threads == 0` means rayon's default); without the feature,
//! or with `threads == 1`, it runs sequentially. Output never depends on the
//! thread count: ordering comes from the collect, not from scheduling.

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if threads == 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("failed to build rayon pool");
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(count: usize, _threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}
