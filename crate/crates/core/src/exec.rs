//! Evaluation strategy for embarrassingly parallel sweeps.
//!
//! Results are always returned in input order, so sweep output does not
//! depend on which worker finished first.

/// Environment variable holding the worker count for parallel sweeps.
pub const WORKERS_ENV: &str = "LVCHEMO_WORKERS";

/// How independent work items are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work stealing. Without the `parallel` feature this is the same
    /// as [`Execution::Sequential`].
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel => par_map(items, f),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sizes the global worker pool from [`WORKERS_ENV`].
///
/// Returns the worker count that was requested, or `None` when the variable is
/// unset, unparsable, or the pool was already initialised.
pub fn init_workers_from_env() -> Option<usize> {
    let n = std::env::var(WORKERS_ENV).ok()?.trim().parse::<usize>().ok()?;
    if n == 0 {
        return None;
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok()?;
    }
    Some(n)
}
