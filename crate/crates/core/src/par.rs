//! Parallel dispatch helpers.
//!
//! With the `parallel` feature (the default) the hot loops fan out over rayon;
//! without it the same closures run sequentially. Every output element is
//! written by exactly one task and every per-element reduction runs in a fixed
//! order, so both builds produce bit-identical results.

/// Runs `fill(i, chunk)` over consecutive `chunk_len` slices of `data`.
#[cfg(feature = "parallel")]
pub fn for_each_chunk_mut<F>(data: &mut [f64], chunk_len: usize, fill: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| fill(i, c));
}

/// Sequential fallback; same contract as the parallel version.
#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk_mut<F>(data: &mut [f64], chunk_len: usize, fill: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| fill(i, c));
}

/// Collects `f(0..count)` preserving index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

/// Sequential fallback; same contract as the parallel version.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// True when this build dispatches work through rayon.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
