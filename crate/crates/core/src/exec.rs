//! Path-indexed execution.
//!
//! Every parallel helper here produces results ordered by index, and every
//! reduction combines fixed-size chunks in a fixed pairwise tree. The output
//! therefore does not depend on the number of worker threads, or on whether
//! the `parallel` feature is enabled at all.

/// Chunk length used by [`chunked_fold`] when callers do not care.
pub const DEFAULT_CHUNK: usize = 1024;

/// Sequential implementations, always available.
pub mod sequential {
    pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
    where
        F: Fn(usize) -> T,
    {
        (0..n).map(f).collect()
    }
}

/// Rayon-backed implementations.
#[cfg(feature = "parallel")]
pub mod parallel {
    use rayon::prelude::*;

    pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    parallel::map_indexed(n, f)
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    sequential::map_indexed(n, f)
}

/// Fallible map. On failure the error of the lowest failing index is
/// returned, so error reporting is as deterministic as the results.
pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

/// Combines `items` by a balanced pairwise tree, left to right.
pub fn pairwise_reduce<A, C>(mut items: Vec<A>, combine: C) -> Option<A>
where
    C: Fn(A, A) -> A,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Folds `0..n` in chunks of `chunk` consecutive indices (sequential inside
/// a chunk, chunks in parallel) and merges the chunk accumulators with
/// [`pairwise_reduce`].
pub fn chunked_fold<A, I, F, C>(n: usize, chunk: usize, init: I, fold: F, combine: C) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, usize) + Sync + Send,
    C: Fn(A, A) -> A,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let partials = map_indexed(n_chunks, |c| {
        let mut acc = init();
        for i in c * chunk..((c + 1) * chunk).min(n) {
            fold(&mut acc, i);
        }
        acc
    });
    pairwise_reduce(partials, combine).unwrap_or_else(init)
}
