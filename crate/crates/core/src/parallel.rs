//! Data-parallel helpers with a sequential fallback.
//!
//! Everything that fans out over tasks, probe points, or restarts goes through
//! this module. With the `parallel` feature (the default) the maps run on
//! rayon once the batch is large enough to pay for the dispatch; small
//! batches and `--no-default-features` builds run sequentially with identical
//! results. Outputs are collected in index order, so downstream reductions
//! are deterministic either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Batches smaller than this stay sequential; thread handoff costs more than
/// the work itself for few-task pools.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_LEN: usize = 16;

/// Maps `f` over `items`, preserving input order.
#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if items.len() < MIN_PARALLEL_LEN {
        items.iter().map(f).collect()
    } else {
        items.par_iter().map(f).collect()
    }
}

/// Maps `f` over `items`, preserving input order.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    if n < MIN_PARALLEL_LEN {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Maps `f` over `0..n`, preserving index order.
#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Always-sequential variant of [`map_collect`], kept as the baseline side of
/// the benchmark suite.
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Always-sequential variant of [`map_range`].
pub fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_collect_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let doubled = map_collect(&items, |x| x * 2);
        let doubled_seq = map_collect_seq(&items, |x| x * 2);
        assert_eq!(doubled, doubled_seq);
        assert_eq!(doubled[999], 1998);
    }

    #[test]
    fn map_range_matches_seq() {
        assert_eq!(map_range(17, |i| i * i), map_range_seq(17, |i| i * i));
        assert_eq!(map_range(7, |i| i + 1), map_range_seq(7, |i| i + 1));
    }
}
