//! Execution mode for the data-parallel loops (MC replicates, optimizer
//! restarts, noise-grid sweeps, boundary-value grids).
//!
//! With the `parallel` feature the loops run on rayon's pool; without it, or
//! with [`Exec::Sequential`], they run in order on the calling thread. Both
//! paths produce identical results because every work item derives its own
//! RNG stream from its index.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Maps `f` over `0..len`, collecting results in index order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..len).into_par_iter().map(f).collect()
            }
            _ => (0..len).map(f).collect(),
        }
    }

    /// Like [`Exec::map`] over a slice.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        self.map(items.len(), |i| f(&items[i]))
    }
}

/// Sizes the global worker pool. Only the first call has an effect; without
/// the `parallel` feature this is a no-op.
pub fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::debug!("thread pool already initialized: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}
