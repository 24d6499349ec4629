//! Chunked map and the three reductions (sum, argmin, first hit).
//!
//! Chunk boundaries depend only on `chunk_size`, and partial results are always
//! combined in chunk order, so both backends produce bit-identical output.

use super::{Backend, ExecutorConfig};
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use std::collections::HashMap;
use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

fn pool(workers: usize) -> Arc<ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    pools
        .entry(workers)
        .or_insert_with(|| {
            Arc::new(
                ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(move |i| format!("kernel-{workers}-{i}"))
                    .build()
                    .expect("failed to start kernel worker pool"),
            )
        })
        .clone()
}

fn chunk_range(chunk: usize, chunk_size: usize, len: usize) -> Range<usize> {
    let start = chunk * chunk_size;
    start..(start + chunk_size).min(len)
}

impl ExecutorConfig {
    /// Applies `f` to each chunk of `0..len`; results are in chunk order.
    pub(crate) fn map_chunks<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, Range<usize>) -> T + Sync,
    {
        let size = self.chunk_size.max(1);
        let chunks = len.div_ceil(size);
        match self.backend {
            Backend::Sequential => (0..chunks).map(|c| f(c, chunk_range(c, size, len))).collect(),
            Backend::Parallel => pool(self.worker_count.max(1)).install(|| {
                (0..chunks)
                    .into_par_iter()
                    .map(|c| f(c, chunk_range(c, size, len)))
                    .collect()
            }),
        }
    }

    /// Pairwise-tree sum of `term(i)` over `0..len`.
    pub(crate) fn sum(&self, len: usize, term: impl Fn(usize) -> f64 + Sync) -> f64 {
        let partials = self.map_chunks(len, |_, r| tree_sum(r, &term));
        pairwise_sum(&partials)
    }

    /// Smallest `key` over the items for which `item(i)` is `Some`; ties go to
    /// the lowest index.
    pub(crate) fn argmin<T: Send>(
        &self,
        len: usize,
        item: impl Fn(usize) -> Option<T> + Sync,
        key: impl Fn(&T) -> f64 + Sync,
    ) -> Option<(usize, T)> {
        let better = |best: &Option<(usize, T)>, i: usize, k: f64| match best {
            None => true,
            Some((j, b)) => {
                let kb = key(b);
                k < kb || (k == kb && i < *j)
            }
        };
        let partials = self.map_chunks(len, |_, r| {
            let mut best: Option<(usize, T)> = None;
            for i in r {
                if let Some(v) = item(i) {
                    if better(&best, i, key(&v)) {
                        best = Some((i, v));
                    }
                }
            }
            best
        });
        let mut best = None;
        for (i, v) in partials.into_iter().flatten() {
            if better(&best, i, key(&v)) {
                best = Some((i, v));
            }
        }
        best
    }

    /// Lowest index for which `item(i)` is `Some`. Chunks above an already-hit
    /// chunk are skipped.
    pub(crate) fn first_hit<T: Send>(
        &self,
        len: usize,
        item: impl Fn(usize) -> Option<T> + Sync,
    ) -> Option<(usize, T)> {
        if self.backend == Backend::Sequential {
            return (0..len).find_map(|i| item(i).map(|v| (i, v)));
        }
        let lowest_hit_chunk = AtomicUsize::new(usize::MAX);
        self.map_chunks(len, |c, r| {
            if c > lowest_hit_chunk.load(Ordering::Relaxed) {
                return None;
            }
            let hit = r.into_iter().find_map(|i| item(i).map(|v| (i, v)));
            if hit.is_some() {
                lowest_hit_chunk.fetch_min(c, Ordering::Relaxed);
            }
            hit
        })
        .into_iter()
        .flatten()
        .next()
    }
}

fn tree_sum(r: Range<usize>, term: &impl Fn(usize) -> f64) -> f64 {
    match r.len() {
        0 => 0.0,
        1 => term(r.start),
        n => {
            let mid = r.start + n / 2;
            tree_sum(r.start..mid, term) + tree_sum(mid..r.end, term)
        }
    }
}

/// Pairwise (binary-tree) sum; the split point is always `len / 2`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    tree_sum(0..values.len(), &|i| values[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_shape() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.0]), 3.0);
        // ((1e16 + 1) + (-1e16 + 1)): tree order, not left-to-right
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(pairwise_sum(&v), (1e16 + 1.0) + (-1e16 + 1.0));
    }

    #[test]
    fn backends_agree_bitwise_on_sums() {
        let term = |i: usize| ((i as f64) * 0.37).sin() * 1e3 + 1.0 / (i as f64 + 1.0);
        for chunk in [1, 7, 64, 4096] {
            let seq = ExecutorConfig::sequential().with_chunk_size(chunk).sum(10_001, term);
            for w in [2, 3, 8] {
                let par = ExecutorConfig::parallel(w).with_chunk_size(chunk).sum(10_001, term);
                assert_eq!(seq.to_bits(), par.to_bits(), "chunk {chunk} workers {w}");
            }
        }
    }

    #[test]
    fn argmin_ties_go_to_lowest_index() {
        let vals = [5.0, 2.0, 9.0, 2.0, 2.0, 7.0];
        for cfg in [
            ExecutorConfig::sequential().with_chunk_size(2),
            ExecutorConfig::parallel(4).with_chunk_size(1),
        ] {
            let (i, v) = cfg.argmin(vals.len(), |i| Some(vals[i]), |v| *v).unwrap();
            assert_eq!((i, v), (1, 2.0));
        }
        let none = ExecutorConfig::sequential().argmin(3, |_| None::<f64>, |v| *v);
        assert!(none.is_none());
    }

    #[test]
    fn first_hit_is_lowest_index() {
        let hits = |i: usize| (i % 97 == 13 || i == 5000).then_some(i);
        for cfg in [
            ExecutorConfig::sequential(),
            ExecutorConfig::parallel(4).with_chunk_size(10),
            ExecutorConfig::parallel(8).with_chunk_size(1),
        ] {
            assert_eq!(cfg.first_hit(10_000, hits).map(|h| h.0), Some(13));
            assert_eq!(cfg.first_hit(10, |_| None::<()>), None);
        }
    }

    #[test]
    fn empty_input() {
        let cfg = ExecutorConfig::parallel(2);
        assert_eq!(cfg.sum(0, |_| 1.0), 0.0);
        assert!(cfg.map_chunks(0, |_, r| r.len()).is_empty());
    }
}
