use crate::error::{Error, Result};
use crate::instance::{Loss, Shape};
use crate::linalg::{from_dmatrix, norm_sq};

/// Trimmed PCA: `f_i(U) = 0.5 ||a_i||^2 - 0.5 ||U^T a_i||^2`, which equals
/// `0.5 ||(I - U U^T) a_i||^2` on matrices with orthonormal columns.
/// `U` is row-major `m x k`; `grad f_i(U) = -a_i a_i^T U`.
#[derive(Clone, Debug)]
pub struct TrimmedPCA {
    /// Columns `a_i` stored contiguously, `n x m`.
    columns: Vec<f64>,
    m: usize,
    rank: usize,
}

impl TrimmedPCA {
    /// `columns` holds the data columns back to back (`n` blocks of `m`).
    pub fn new(columns: Vec<f64>, m: usize, rank: usize) -> Result<Self> {
        if m == 0 || rank == 0 || rank > m || !columns.len().is_multiple_of(m) || columns.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "trimmed PCA needs 1 <= rank <= m and whole columns; got m = {m}, rank = {rank}, {} values",
                columns.len()
            )));
        }
        Ok(TrimmedPCA { columns, m, rank })
    }

    /// From a row-major `m x n` data matrix whose columns are the examples.
    pub fn from_matrix(data: &[f64], m: usize, n: usize, rank: usize) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form a {m} x {n} matrix",
                data.len()
            )));
        }
        let mut columns = Vec::with_capacity(m * n);
        for i in 0..n {
            for r in 0..m {
                columns.push(data[r * n + i]);
            }
        }
        Self::new(columns, m, rank)
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Row-major `m x n` data matrix.
    pub fn data_matrix(&self) -> Vec<f64> {
        let n = self.count();
        let mut out = vec![0.0; self.m * n];
        for i in 0..n {
            for r in 0..self.m {
                out[r * n + i] = self.columns[i * self.m + r];
            }
        }
        out
    }

    /// Top-`rank` left singular vectors of the data matrix (the untrimmed
    /// PCA solution) and all singular values, descending.
    pub fn svd_start(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        top_left_singular_vectors(&self.data_matrix(), self.m, self.count(), self.rank)
    }

    /// Optimal untrimmed objective `0.5 sum ||a_i||^2 - 0.5 sum_{j<=k} s_j^2`
    /// (summed, not averaged).
    pub fn untrimmed_optimum_sum(&self) -> Result<f64> {
        let (_, s) = self.svd_start()?;
        let total: f64 = self.columns.iter().map(|v| v * v).sum();
        let kept: f64 = s.iter().take(self.rank).map(|v| v * v).sum();
        Ok(0.5 * total - 0.5 * kept)
    }
}

fn project_coords(u: &[f64], a: &[f64], k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k];
    for (r, ar) in a.iter().enumerate() {
        let row = &u[r * k..(r + 1) * k];
        for j in 0..k {
            c[j] += ar * row[j];
        }
    }
    c
}

impl Loss for TrimmedPCA {
    fn count(&self) -> usize {
        self.columns.len() / self.m
    }

    fn shape(&self) -> Shape {
        Shape::matrix(self.m, self.rank)
    }

    fn value(&self, i: usize, u: &[f64]) -> f64 {
        let a = self.column(i);
        let c = project_coords(u, a, self.rank);
        0.5 * norm_sq(a) - 0.5 * norm_sq(&c)
    }

    fn gradient(&self, i: usize, u: &[f64], out: &mut [f64]) {
        let a = self.column(i);
        let k = self.rank;
        let c = project_coords(u, a, k);
        for (r, ar) in a.iter().enumerate() {
            for j in 0..k {
                out[r * k + j] = -ar * c[j];
            }
        }
    }

    fn lipschitz(&self, i: usize) -> f64 {
        norm_sq(self.column(i)).max(f64::MIN_POSITIVE)
    }

    fn cost_hint(&self) -> usize {
        2 * self.m * self.rank
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaEval {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Set when `U` was not orthonormal and `0.5 ||(I - U U^T) a||^2` was
    /// used in place of the identity form.
    pub used_full_form: bool,
}

/// Loss and gradient of one PCA term at `U` (`m x k`, row-major).
pub fn pca_loss_and_grad(u: &[f64], a: &[f64], k: usize) -> PcaEval {
    let m = a.len();
    let c = project_coords(u, a, k);
    let mut grad = vec![0.0; m * k];
    for (r, ar) in a.iter().enumerate() {
        for j in 0..k {
            grad[r * k + j] = -ar * c[j];
        }
    }
    let orthonormal = crate::instance::Regularizer::Stiefel { rows: m, cols: k }.residual(u) <= 1e-8;
    let loss = if orthonormal {
        0.5 * norm_sq(a) - 0.5 * norm_sq(&c)
    } else {
        // (I - U U^T) a = a - U c
        let resid: Vec<f64> = (0..m)
            .map(|r| a[r] - (0..k).map(|j| u[r * k + j] * c[j]).sum::<f64>())
            .collect();
        0.5 * norm_sq(&resid)
    };
    PcaEval {
        loss,
        grad,
        used_full_form: !orthonormal,
    }
}

/// Top-`k` left singular vectors (row-major `m x k`) and all singular values
/// in descending order, for a row-major `m x n` matrix.
pub fn top_left_singular_vectors(
    data: &[f64],
    m: usize,
    n: usize,
    k: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if k > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "rank {k} exceeds min({m}, {n})"
        )));
    }
    let mat = nalgebra::DMatrix::from_row_slice(m, n, data);
    let svd = mat.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values: Vec<f64> = order.iter().map(|&j| svd.singular_values[j]).collect();
    let mut top = nalgebra::DMatrix::zeros(m, k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        top.set_column(dst, &u.column(src));
    }
    Ok((from_dmatrix(&top), values))
}
