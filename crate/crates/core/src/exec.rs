//! Batch-evaluation helpers with a sequential fallback.
//!
//! With the `parallel` feature the maps fan out on the current rayon pool;
//! without it they run as plain iterator chains. Both variants preserve
//! element order, and every caller reduces the collected vector sequentially,
//! so results are bit-identical regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting the results in index order.
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
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

/// Maps `f` over a slice, collecting the results in slice order.
pub(crate) fn map_slice<X, T, F>(xs: &[X], f: F) -> Vec<T>
where
    X: Sync,
    T: Send,
    F: Fn(&X) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        xs.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        xs.iter().map(f).collect()
    }
}
