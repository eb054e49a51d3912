//! Problem instances `F(w, x) = (1/n) sum_i w_i f_i(x) + r1(w) + r2(x)` and
//! the iterate they are evaluated at.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{dot, norm};
use crate::prox::{self, FEASIBILITY_TOL};
use crate::record::Counters;

/// Shape metadata of the model variable. It is always stored flat and
/// row-major; vectors are `len x 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub fn vector(len: usize) -> Self {
        Shape { rows: len, cols: 1 }
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-example smooth losses `f_i` with Lipschitz gradients.
///
/// Implementations must be pure: the solvers evaluate different indices
/// concurrently.
pub trait Loss: Sync + Send {
    /// Number of examples `n`.
    fn count(&self) -> usize;

    fn shape(&self) -> Shape;

    fn value(&self, i: usize, x: &[f64]) -> f64;

    /// Writes `grad f_i(x)` into `out` (length `shape().len()`).
    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]);

    /// Lipschitz constant `L_i` of `grad f_i`.
    fn lipschitz(&self, i: usize) -> f64;

    /// Bound `B_i` on `|w_i|` over the domain of the weight regularizer.
    fn weight_bound(&self, _i: usize) -> f64 {
        1.0
    }

    /// Rough flop count of one gradient; used to decide when to go parallel.
    fn cost_hint(&self) -> usize {
        self.shape().len()
    }
}

impl<T: Loss + ?Sized> Loss for Box<T> {
    fn count(&self) -> usize {
        (**self).count()
    }
    fn shape(&self) -> Shape {
        (**self).shape()
    }
    fn value(&self, i: usize, x: &[f64]) -> f64 {
        (**self).value(i, x)
    }
    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        (**self).gradient(i, x, out)
    }
    fn lipschitz(&self, i: usize) -> f64 {
        (**self).lipschitz(i)
    }
    fn weight_bound(&self, i: usize) -> f64 {
        (**self).weight_bound(i)
    }
    fn cost_hint(&self) -> usize {
        (**self).cost_hint()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    /// Indicator of `{w in [0,1]^n : sum w = h}`.
    CappedSimplex { h: f64 },
    /// Indicator of the all-ones vector (no trimming).
    AllOnes,
    /// `(strength/2) ||x||^2`.
    Ridge { strength: f64 },
    /// Indicator of `rows x cols` matrices with orthonormal columns.
    Stiefel { rows: usize, cols: usize },
    /// Indicator of the unit Frobenius sphere.
    FrobeniusSphere,
    Zero,
}

impl Regularizer {
    /// The ridge term `(lambda / 2n) ||X||^2`.
    pub fn ridge_per_example(lambda: f64, n: usize) -> Self {
        Regularizer::Ridge {
            strength: lambda / n as f64,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::CappedSimplex { .. } => "capped simplex",
            Regularizer::AllOnes => "all-ones",
            Regularizer::Ridge { .. } => "ridge",
            Regularizer::Stiefel { .. } => "Stiefel manifold",
            Regularizer::FrobeniusSphere => "Frobenius sphere",
            Regularizer::Zero => "zero",
        }
    }

    pub fn is_indicator(&self) -> bool {
        !matches!(self, Regularizer::Ridge { .. } | Regularizer::Zero)
    }

    /// Upper bound on admissible prox steps. All regularizers here have a
    /// globally defined prox.
    pub fn prox_guard(&self) -> f64 {
        f64::INFINITY
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        match *self {
            Regularizer::CappedSimplex { h } if !(h >= 0.0 && h <= len as f64) => {
                Err(Error::InvalidArgument(format!(
                    "capped simplex needs 0 <= h <= n = {len}, got {h}"
                )))
            }
            Regularizer::Ridge { strength } if !(strength >= 0.0) => Err(
                Error::InvalidArgument(format!("ridge needs lambda >= 0, got {strength}")),
            ),
            Regularizer::Stiefel { rows, cols } if rows < cols || rows * cols != len => {
                Err(Error::InvalidArgument(format!(
                    "Stiefel({rows}, {cols}) incompatible with variable of length {len}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Constraint residual; zero for non-indicator regularizers.
    pub fn residual(&self, v: &[f64]) -> f64 {
        match *self {
            Regularizer::CappedSimplex { h } => {
                let box_violation = v
                    .iter()
                    .map(|&x| (-x).max(x - 1.0).max(0.0))
                    .fold(0.0, f64::max);
                let sum: f64 = v.iter().sum();
                box_violation.max((sum - h).abs())
            }
            Regularizer::AllOnes => v.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max),
            Regularizer::Stiefel { rows, cols } => stiefel_residual(v, rows, cols),
            Regularizer::FrobeniusSphere => (norm(v) - 1.0).abs(),
            Regularizer::Ridge { .. } | Regularizer::Zero => 0.0,
        }
    }

    pub fn value(&self, v: &[f64]) -> Result<f64> {
        match *self {
            Regularizer::Ridge { strength } => Ok(0.5 * strength * dot(v, v)),
            Regularizer::Zero => Ok(0.0),
            _ => {
                let residual = self.residual(v);
                if residual.is_nan() || residual > FEASIBILITY_TOL {
                    Err(Error::Infeasible {
                        set: self.name(),
                        residual,
                    })
                } else {
                    Ok(0.0)
                }
            }
        }
    }

    /// `prox_{step * r}(v)`.
    pub fn prox(&self, v: &[f64], step: f64) -> Result<Vec<f64>> {
        match *self {
            Regularizer::CappedSimplex { h } => prox::project_capped_simplex(v, h),
            Regularizer::AllOnes => Ok(prox::prox_indicator_all_ones(v)),
            Regularizer::Ridge { strength } => prox::prox_ridge(v, step, strength),
            Regularizer::Stiefel { rows, cols } => prox::project_stiefel(v, rows, cols),
            Regularizer::FrobeniusSphere => prox::project_frobenius_sphere(v),
            Regularizer::Zero => Ok(v.to_vec()),
        }
    }
}

fn stiefel_residual(u: &[f64], rows: usize, cols: usize) -> f64 {
    if u.len() != rows * cols {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    for a in 0..cols {
        for b in 0..cols {
            let mut g = 0.0;
            for r in 0..rows {
                g += u[r * cols + a] * u[r * cols + b];
            }
            let e = g - if a == b { 1.0 } else { 0.0 };
            acc += e * e;
        }
    }
    acc.sqrt()
}

/// Primal iterate `(w, x)` and iteration counter.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateState {
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub k: u64,
}

impl IterateState {
    pub fn new(w: Vec<f64>, x: Vec<f64>) -> Self {
        IterateState { w, x, k: 0 }
    }
}

/// A loss family together with its weight and model regularizers.
pub struct Problem<L> {
    pub loss: L,
    pub reg_w: Regularizer,
    pub reg_x: Regularizer,
    pub exec: Exec,
    lipschitz_max: f64,
}

pub type DynProblem = Problem<Box<dyn Loss>>;

impl<L: Loss> Problem<L> {
    pub fn new(loss: L, reg_w: Regularizer, reg_x: Regularizer) -> Result<Self> {
        let n = loss.count();
        let d = loss.shape().len();
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "need n >= 1 and d >= 1, got n = {n}, d = {d}"
            )));
        }
        let mut lipschitz_max: f64 = 0.0;
        for i in 0..n {
            let l = loss.lipschitz(i);
            let b = loss.weight_bound(i);
            if !(l > 0.0 && l.is_finite()) || !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "example {i}: need L_i > 0 and B_i > 0, got L_i = {l}, B_i = {b}"
                )));
            }
            lipschitz_max = lipschitz_max.max(l);
        }
        reg_w.validate(n)?;
        reg_x.validate(d)?;
        Ok(Problem {
            loss,
            reg_w,
            reg_x,
            exec: Exec::default(),
            lipschitz_max,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn n(&self) -> usize {
        self.loss.count()
    }

    pub fn dim(&self) -> usize {
        self.loss.shape().len()
    }

    pub fn shape(&self) -> Shape {
        self.loss.shape()
    }

    /// Global `L = max_i L_i`.
    pub fn lipschitz_max(&self) -> f64 {
        self.lipschitz_max
    }

    pub fn weight_bounds(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.loss.weight_bound(i)).collect()
    }

    /// Initial weights: `(h/n) 1` projected onto the weight domain.
    pub fn initial_weights(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let level = match self.reg_w {
            Regularizer::CappedSimplex { h } => h / n as f64,
            _ => 1.0,
        };
        self.reg_w.prox(&vec![level; n], 1.0)
    }

    /// `(f_1(x), ..., f_n(x))`; counts `n` function evaluations.
    pub fn losses(&self, x: &[f64], counters: &mut Counters) -> Vec<f64> {
        counters.fun_evals += self.n() as u64;
        self.exec
            .map(self.n(), self.loss.cost_hint(), |i| self.loss.value(i, x))
    }

    /// Rows `w_i grad f_i(x)` for each index in `indices` (duplicates
    /// allowed), flat `indices.len() x d`. Counts one gradient per index.
    pub fn weighted_gradients(
        &self,
        w: &[f64],
        x: &[f64],
        indices: &[usize],
        counters: &mut Counters,
    ) -> Vec<f64> {
        let d = self.dim();
        counters.grad_evals += indices.len() as u64;
        let mut out = vec![0.0; indices.len() * d];
        self.exec.fill_rows(&mut out, d, |r, row| {
            let i = indices[r];
            self.loss.gradient(i, x, row);
            let wi = w[i];
            for v in row.iter_mut() {
                *v *= wi;
            }
        });
        out
    }

    /// `(1/n) sum_i w_i grad f_i(x)`, reduced in index order.
    pub fn full_gradient(&self, w: &[f64], x: &[f64], counters: &mut Counters) -> Vec<f64> {
        let n = self.n();
        let d = self.dim();
        let all: Vec<usize> = (0..n).collect();
        let rows = self.weighted_gradients(w, x, &all, counters);
        let mut g = vec![0.0; d];
        for row in rows.chunks(d) {
            for (gj, rj) in g.iter_mut().zip(row) {
                *gj += rj;
            }
        }
        let inv = 1.0 / n as f64;
        g.iter_mut().for_each(|v| *v *= inv);
        g
    }

    pub fn check_state(&self, state: &IterateState) -> Result<()> {
        if state.w.len() != self.n() || state.x.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "state has |w| = {}, |x| = {}, problem has n = {}, d = {}",
                state.w.len(),
                state.x.len(),
                self.n(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `F(w, x)`. Infeasible points give [`Error::Infeasible`]; overflow or
    /// NaN gives [`Error::NonFinite`].
    pub fn objective(&self, state: &IterateState) -> Result<f64> {
        self.check_state(state)?;
        let r1 = self.reg_w.value(&state.w)?;
        let r2 = self.reg_x.value(&state.x)?;
        let mut scratch = Counters::default();
        let f = self.losses(&state.x, &mut scratch);
        let data: f64 = state.w.iter().zip(&f).map(|(w, fi)| w * fi).sum::<f64>() / self.n() as f64;
        let total = data + r1 + r2;
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::NonFinite(format!("objective evaluated to {total}")))
        }
    }
}
