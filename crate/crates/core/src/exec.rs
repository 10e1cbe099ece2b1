//! Data-parallel execution of independent work items.
//!
//! All batch loops in the crate (Monte Carlo trials, risk-table cells,
//! evaluation grids) are expressed as an indexed map over `0..n`. The output
//! vector is always in index order, and every work item derives its own seed
//! from its index, so the result is identical for any worker count.

/// How to execute an indexed batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Plain loop on the calling thread.
    Sequential,
    /// Rayon work stealing on the global pool.
    ///
    /// Without the `parallel` feature this silently runs sequentially.
    #[default]
    Parallel,
    /// Rayon on a dedicated pool with exactly this many threads.
    Workers(usize),
}

impl Exec {
    /// `--workers` semantics: 1 is sequential, 0 means "all cores".
    pub fn from_workers(workers: usize) -> Self {
        match workers {
            0 => Exec::Parallel,
            1 => Exec::Sequential,
            n => Exec::Workers(n),
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Exec::Sequential)
    }

    /// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => par::map(n, f),
            #[cfg(feature = "parallel")]
            Exec::Workers(k) => match rayon::ThreadPoolBuilder::new().num_threads(*k).build() {
                Ok(pool) => pool.install(|| par::map(n, f)),
                Err(e) => {
                    log::warn!("could not build a {k}-thread pool ({e}); using the global pool");
                    par::map(n, f)
                }
            },
            #[cfg(not(feature = "parallel"))]
            _ => (0..n).map(f).collect(),
        }
    }

    /// Like [`Exec::map`] but short-circuits on the first error (by index order
    /// of the returned error when several fail).
    pub fn try_map<T, E, F>(&self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}

#[cfg(feature = "parallel")]
mod par {
    use rayon::prelude::*;

    pub(super) fn map<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}
