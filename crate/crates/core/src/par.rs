//! Data-parallel helpers.
//!
//! Every fan-out in the crate (Monte Carlo trials, per-collection
//! optimizations) goes through [`map_indexed`], which runs on rayon when the
//! `parallel` feature is enabled and [`Execution::Parallel`] is requested,
//! and degrades to a plain loop otherwise. Results always come back in index
//! order, so aggregation never depends on completion order.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `0..len`, returning outputs in index order.
pub fn map_indexed<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Runs `body` inside a rayon pool with `workers` threads (0 = rayon default).
/// Without the `parallel` feature this simply calls `body`.
pub fn with_workers<T: Send>(workers: usize, body: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    if workers > 0 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            return pool.install(body);
        }
    }
    let _ = workers;
    body()
}
