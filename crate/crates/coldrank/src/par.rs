//! Data-parallel map helpers with a sequential fallback.
//!
//! All batch loops in this crate (ranking cases, embedding movies, Monte
//! Carlo trials) go through [`map`], which dispatches to rayon when the
//! `parallel` feature is enabled and to a plain iterator otherwise. Results
//! are always collected in input order, so the two paths produce identical
//! output.

/// Map `f` over `items`, preserving input order.
///
/// Uses rayon when the `parallel` feature is on, otherwise sequential.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

/// Sequential reference path. Exposed for the bench suite.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Rayon path. Exposed for the bench suite.
#[cfg(feature = "parallel")]
pub fn map_parallel<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}
