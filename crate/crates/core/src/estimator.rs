//! Dual-variable table and the variance-reduced gradient estimator
//! `(1/b) sum_{i in I} (w_i grad f_i(x) - y_i) + (1/n) sum_i y_i`.

use crate::instance::{IterateState, Loss, Problem};
use crate::record::Counters;

/// Cached per-example dual vectors `y_i = w_i^l grad f_i(x^l)` from past
/// iterates `l`, plus their running sum.
#[derive(Clone, Debug, PartialEq)]
pub struct DualTable {
    n: usize,
    d: usize,
    y: Vec<f64>,
    aggregate: Vec<f64>,
    /// Iterate index `l` whose `(w^l, x^l)` produced `y_i`.
    provenance: Vec<u64>,
    /// Individual incremental updates since the last exact resummation.
    pending: usize,
}

impl DualTable {
    /// All-zero table (not yet consistent with any iterate).
    pub fn zeros(n: usize, d: usize) -> Self {
        DualTable {
            n,
            d,
            y: vec![0.0; n * d],
            aggregate: vec![0.0; d],
            provenance: vec![0; n],
            pending: 0,
        }
    }

    /// Table with `y_i = w_i grad f_i(x)` for every `i`; `n` gradient
    /// evaluations.
    pub fn fresh<L: Loss>(problem: &Problem<L>, state: &IterateState, counters: &mut Counters) -> Self {
        let mut t = DualTable::zeros(problem.n(), problem.dim());
        t.refresh_all(problem, state, counters);
        t
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.y[i * self.d..(i + 1) * self.d]
    }

    /// Cached `sum_i y_i`.
    pub fn aggregate(&self) -> &[f64] {
        &self.aggregate
    }

    pub fn provenance(&self, i: usize) -> u64 {
        self.provenance[i]
    }

    /// `sum_i y_i` recomputed from scratch in index order.
    pub fn resummed(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.d];
        for row in self.y.chunks(self.d) {
            for (sj, rj) in s.iter_mut().zip(row) {
                *sj += rj;
            }
        }
        s
    }

    fn resum(&mut self) {
        self.aggregate = self.resummed();
        self.pending = 0;
    }

    /// `y_i <- w_i grad f_i(x)` for all `i`, aggregate rebuilt from scratch.
    pub fn refresh_all<L: Loss>(
        &mut self,
        problem: &Problem<L>,
        state: &IterateState,
        counters: &mut Counters,
    ) {
        let all: Vec<usize> = (0..self.n).collect();
        self.y = problem.weighted_gradients(&state.w, &state.x, &all, counters);
        self.provenance.iter_mut().for_each(|p| *p = state.k);
        self.resum();
    }

    /// `y_i <- w_i grad f_i(x)` for `i` in `subset`, with the aggregate
    /// adjusted incrementally.
    pub fn update_subset<L: Loss>(
        &mut self,
        problem: &Problem<L>,
        state: &IterateState,
        subset: &[usize],
        counters: &mut Counters,
    ) {
        if subset.is_empty() {
            return;
        }
        let rows = problem.weighted_gradients(&state.w, &state.x, subset, counters);
        self.store_rows(subset, &rows, state.k);
    }

    /// Installs precomputed rows `w_i grad f_i(x^l)` for the indices in
    /// `subset` (duplicates allowed; rows aligned with `subset`).
    pub fn store_rows(&mut self, subset: &[usize], rows: &[f64], iterate: u64) {
        let d = self.d;
        debug_assert_eq!(rows.len(), subset.len() * d);
        for (r, &i) in subset.iter().enumerate() {
            let new = &rows[r * d..(r + 1) * d];
            let old = &mut self.y[i * d..(i + 1) * d];
            for ((a, o), n) in self.aggregate.iter_mut().zip(old.iter()).zip(new) {
                *a += n - o;
            }
            old.copy_from_slice(new);
            self.provenance[i] = iterate;
            self.pending += 1;
        }
        if self.pending >= self.n {
            self.resum();
        }
    }

    /// Estimator value from precomputed batch rows `w_i grad f_i(x)`
    /// aligned with `batch`. Summands are reduced in batch order.
    pub fn estimate_from_rows(&self, batch: &[usize], rows: &[f64]) -> Vec<f64> {
        let d = self.d;
        let b = batch.len() as f64;
        let mut corr = vec![0.0; d];
        for (r, &i) in batch.iter().enumerate() {
            let g = &rows[r * d..(r + 1) * d];
            let y = self.y(i);
            for j in 0..d {
                corr[j] += g[j] - y[j];
            }
        }
        let inv_n = 1.0 / self.n as f64;
        corr.iter()
            .zip(&self.aggregate)
            .map(|(c, a)| c / b + a * inv_n)
            .collect()
    }
}

/// Variance-reduced gradient for `batch` (a multiset of indices); exactly
/// `batch.len()` gradient evaluations.
pub fn vr_gradient<L: Loss>(
    problem: &Problem<L>,
    state: &IterateState,
    duals: &DualTable,
    batch: &[usize],
    counters: &mut Counters,
) -> Vec<f64> {
    let rows = problem.weighted_gradients(&state.w, &state.x, batch, counters);
    duals.estimate_from_rows(batch, &rows)
}

/// `V_i = ||w_i grad f_i(x) - y_i||^2` per example; `n` gradient evaluations.
pub fn dual_residuals<L: Loss>(
    problem: &Problem<L>,
    state: &IterateState,
    duals: &DualTable,
    counters: &mut Counters,
) -> Vec<f64> {
    let n = problem.n();
    let d = problem.dim();
    let all: Vec<usize> = (0..n).collect();
    let rows = problem.weighted_gradients(&state.w, &state.x, &all, counters);
    (0..n)
        .map(|i| {
            rows[i * d..(i + 1) * d]
                .iter()
                .zip(duals.y(i))
                .map(|(g, y)| (g - y) * (g - y))
                .sum()
        })
        .collect()
}
