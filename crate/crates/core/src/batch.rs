//! Data-parallel batch helpers.
//!
//! With the `parallel` feature (on by default) the top-level functions run on
//! the rayon global pool; without it they fall back to [`sequential`]. Both
//! variants are always addressable explicitly so they can be compared.

/// Plain iterator implementations.
pub mod sequential {
    pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        items.iter().map(f).collect()
    }

    pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R,
    {
        (0..n).map(f).collect()
    }
}

/// rayon implementations.
#[cfg(feature = "parallel")]
pub mod parallel {
    use rayon::prelude::*;

    pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }

    pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}

#[cfg(feature = "parallel")]
pub use parallel::{map, map_indices};
#[cfg(not(feature = "parallel"))]
pub use sequential::{map, map_indices};

/// Whether the default helpers run in parallel.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
