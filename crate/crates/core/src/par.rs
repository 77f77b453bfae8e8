// SPDX-License-Identifier: Apache-2.0

//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these fan work out over rayon's
//! pool; without it they fall back to plain sequential iteration. Callers
//! never branch on the feature themselves, and because every work item is
//! addressed by its index, results are identical either way.

/// Environment variable bounding the worker count of the CLI pool.
pub const WORKERS_ENV: &str = "SYNBENCH_WORKERS";

/// Maps `f` over `0..n`, returning results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, returning results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Runs `f` with at most `workers` threads. `None` uses the global pool.
///
/// Without the `parallel` feature the worker count is ignored.
#[cfg(feature = "parallel")]
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(err) => {
                log::warn!("could not build a {n}-thread pool ({err}); using the global pool");
                f()
            }
        },
        None => f(),
    }
}

/// Runs `f` with at most `workers` threads. `None` uses the global pool.
///
/// Without the `parallel` feature the worker count is ignored.
#[cfg(not(feature = "parallel"))]
pub fn with_workers<R, F>(_workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    f()
}

/// Reads [`WORKERS_ENV`]. Unset, empty, zero or unparsable values mean "no bound".
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_keeps_order() {
        let out = map_indexed(1000, |i| i * 3);
        assert!(out.iter().enumerate().all(|(i, &v)| v == i * 3));
    }

    #[test]
    fn worker_bound_does_not_change_results() {
        let a = with_workers(Some(1), || map_indexed(257, |i| (i as u64).wrapping_mul(0x9e37)));
        let b = with_workers(Some(4), || map_indexed(257, |i| (i as u64).wrapping_mul(0x9e37)));
        assert_eq!(a, b);
    }
}
