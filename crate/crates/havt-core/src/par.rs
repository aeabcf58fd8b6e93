//! Data-parallel map helpers. With the `parallel` feature (default) the
//! closures run on the rayon pool; without it they run sequentially. The
//! explicit `*_seq` variants are always available so benchmarks can compare
//! both paths in one build.
//!
//! Outputs are collected in index order, so callers that reduce results
//! sequentially get bit-identical sums regardless of thread scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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

/// Sequential counterpart of [`map_indexed`], independent of features.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Map `f` over a slice, returning results in input order.
pub fn map_slice<'a, T, U, F>(items: &'a [T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> U + Sync + Send,
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

/// Sequential counterpart of [`map_slice`].
pub fn map_slice_seq<'a, T, U, F>(items: &'a [T], f: F) -> Vec<U>
where
    F: Fn(&'a T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let out = map_indexed(100, |i| i * 3);
        let seq = map_indexed_seq(100, |i| i * 3);
        assert_eq!(out, seq);
    }

    #[test]
    fn slice_order_matches_sequential() {
        let xs: Vec<u64> = (0..57).collect();
        assert_eq!(map_slice(&xs, |x| x * x), map_slice_seq(&xs, |x| x * x));
    }
}
