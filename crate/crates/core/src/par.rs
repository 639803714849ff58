//! Data-parallel map over index ranges and slices.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without it
//! they run as plain sequential iterators. Output order always matches input
//! order, so callers get identical results either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
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

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<'a, S, T, F>(items: &'a [S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&'a S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Explicit execution strategy, for comparing both paths in one binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// [`map_range`]: rayon when the `parallel` feature is on.
    #[default]
    Default,
    Sequential,
}

pub fn map_range_in<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Default => map_range(n, f),
        Execution::Sequential => (0..n).map(f).collect(),
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(map_range_in(Execution::Default, 1000, f), map_range_in(Execution::Sequential, 1000, f));
        let v: Vec<usize> = (0..50).collect();
        assert_eq!(map_slice(&v, |&i| i * 2), map_range(50, |i| i * 2));
    }
}
