//! Thin indirection over rayon so every data-parallel loop in the crate has a
//! sequential twin. With the `parallel` feature (default) the helpers fan out
//! on the global rayon pool; without it they are plain iterator loops. Both
//! paths collect results in input order, so outputs are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub(crate) fn map_slice<T: Sync, U: Send>(
    items: &[T],
    f: impl Fn(&T) -> U + Send + Sync,
) -> Vec<U> {
    items.par_iter().map(f).collect()
}

/// Maps `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<T, U>(items: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
#[cfg(feature = "parallel")]
pub(crate) fn map_range<U: Send>(n: usize, f: impl Fn(usize) -> U + Send + Sync) -> Vec<U> {
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<U>(n: usize, f: impl Fn(usize) -> U) -> Vec<U> {
    (0..n).map(f).collect()
}
