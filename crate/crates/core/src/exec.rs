//! Data-parallel execution with a sequential fallback.
//!
//! Results are always returned in index order, so output never depends on
//! scheduling. Without the `parallel` feature every mode runs sequentially.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Use a pool with this many workers (`0` = one per logical core).
    Parallel(usize),
    #[default]
    Auto,
}

impl Execution {
    pub fn workers(self) -> usize {
        match self {
            Execution::Sequential => 1,
            Execution::Parallel(0) | Execution::Auto => available_workers(),
            Execution::Parallel(n) => n,
        }
    }
}

pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        _ => parallel_map(n, exec, f),
    }
}

/// Fallible variant; the first error by index wins.
pub fn try_map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, exec, f).into_iter().collect()
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;

    let run = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
    match exec {
        Execution::Parallel(w) if w > 0 => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        _ => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, _exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

pub fn parse_workers(s: &str) -> Result<Execution> {
    match s.trim() {
        "auto" => Ok(Execution::Auto),
        "1" | "sequential" => Ok(Execution::Sequential),
        n => n
            .parse::<usize>()
            .map(Execution::Parallel)
            .map_err(|_| Error::param(format!("bad worker count `{n}`"))),
    }
}
