//! Execution backends for the per-example loops.
//!
//! Every loop writes its results into index-addressed slots and any
//! reduction happens afterwards, sequentially, in index order. The two
//! backends therefore produce bit-identical results.

/// Below this much work (rows × row width) the parallel backend runs
/// sequentially; spawning tasks costs more than it saves.
#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
const PARALLEL_MIN_WORK: usize = 8 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is on, otherwise identical to
    /// `Sequential`.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when this backend will actually run work on the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Fill `out` row by row: row `r` has length `width` and is produced by
    /// `f(r, row)`.
    pub fn fill_rows<F>(self, out: &mut [f64], width: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        debug_assert_eq!(out.len() % width, 0);
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && out.len() >= PARALLEL_MIN_WORK {
            use rayon::prelude::*;
            out.par_chunks_mut(width)
                .enumerate()
                .for_each(|(r, row)| f(r, row));
            return;
        }
        for (r, row) in out.chunks_mut(width).enumerate() {
            f(r, row);
        }
    }

    /// `(0..len).map(f).collect()`, possibly in parallel. `cost` is a rough
    /// per-item work estimate used only for the parallel cutoff.
    pub fn map<T, F>(self, len: usize, cost: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && len.saturating_mul(cost.max(1)) >= PARALLEL_MIN_WORK {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        let _ = cost;
        (0..len).map(f).collect()
    }
}
