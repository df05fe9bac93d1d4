//! Data-parallel helpers with a sequential fallback.
//!
//! Work is always split into the same fixed-size chunks and the per-chunk
//! results are returned in chunk order, so any reduction the caller does over
//! them is independent of how many worker threads ran. With the `parallel`
//! feature disabled, [`Exec::Parallel`] silently runs sequentially.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this build can actually run chunks concurrently.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Runs `f` over `0..n` split into chunks of `chunk` indices and collects
    /// one result per chunk, in chunk order.
    pub fn map_ranges<R, F>(self, n: usize, chunk: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, Range<usize>) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        let n_chunks = n.div_ceil(chunk);
        let range_of = |k: usize| k * chunk..((k + 1) * chunk).min(n);
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n_chunks).into_par_iter().map(|k| f(k, range_of(k))).collect()
            }
            _ => (0..n_chunks).map(|k| f(k, range_of(k))).collect(),
        }
    }

    /// Like [`Exec::map_ranges`] but hands each chunk a slice of `items`.
    pub fn map_chunks<T, R, F>(self, items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &[T]) -> R + Sync + Send,
    {
        self.map_ranges(items.len(), chunk, |k, r| f(k, &items[r]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_results_come_back_in_order() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            let out = exec.map_ranges(10, 3, |k, r| (k, r.start, r.end));
            assert_eq!(out, vec![(0, 0, 3), (1, 3, 6), (2, 6, 9), (3, 9, 10)]);
        }
    }

    #[test]
    fn empty_input_yields_no_chunks() {
        let out: Vec<usize> = Exec::Parallel.map_ranges(0, 4, |k, _| k);
        assert!(out.is_empty());
    }
}
