use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{IterateState, Loss, Problem, Regularizer, Shape};
use crate::solver::{initial_state, run, Method, RunOutcome, StopRule, TRIM_TOL};
use crate::stepsize::StepSizeSchedule;

/// A putative match `(u1, v1) -> (u2, v2)` between two images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub src: [f64; 2],
    pub dst: [f64; 2],
}

impl Correspondence {
    pub fn new(u1: f64, v1: f64, u2: f64, v2: f64) -> Self {
        Correspondence {
            src: [u1, v1],
            dst: [u2, v2],
        }
    }

    fn b1(&self) -> [f64; 3] {
        [self.src[0], self.src[1], 1.0]
    }

    fn b2(&self) -> [f64; 3] {
        [self.dst[0], self.dst[1], 1.0]
    }
}

fn apply(h: &[f64], b: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for r in 0..3 {
        out[r] = h[3 * r] * b[0] + h[3 * r + 1] * b[1] + h[3 * r + 2] * b[2];
    }
    out
}

/// `f = ||H b1 - b2||^2` and `grad = 2 (H b1 - b2) b1^T` (row-major 3x3).
pub fn homography_loss_and_grad(h: &[f64], b1: &[f64; 3], b2: &[f64; 3]) -> (f64, [f64; 9]) {
    let hb = apply(h, b1);
    let r = [hb[0] - b2[0], hb[1] - b2[1], hb[2] - b2[2]];
    let loss = r.iter().map(|v| v * v).sum();
    let mut g = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            g[3 * i + j] = 2.0 * r[i] * b1[j];
        }
    }
    (loss, g)
}

/// The two DLT constraint rows of a correspondence: `a1 . h` and `a2 . h`
/// are the first two components of `b2 x (H b1)` up to sign.
fn dlt_rows(p: &Correspondence) -> ([f64; 9], [f64; 9]) {
    let b = p.b1();
    let (x2, y2) = (p.dst[0], p.dst[1]);
    let mut a1 = [0.0; 9];
    let mut a2 = [0.0; 9];
    for j in 0..3 {
        a1[3 + j] = -b[j];
        a1[6 + j] = y2 * b[j];
        a2[j] = b[j];
        a2[6 + j] = -x2 * b[j];
    }
    (a1, a2)
}

/// `f = (a1 . h)^2 + (a2 . h)^2` over the DLT rows of the pair, with
/// gradient `2 (a1 . h) a1 + 2 (a2 . h) a2`. Zero whenever `H b1` is
/// parallel to `b2`, whatever the scale of `H`.
pub fn algebraic_loss_and_grad(h: &[f64], pair: &Correspondence) -> (f64, [f64; 9]) {
    let (a1, a2) = dlt_rows(pair);
    let r1: f64 = a1.iter().zip(h).map(|(a, v)| a * v).sum();
    let r2: f64 = a2.iter().zip(h).map(|(a, v)| a * v).sum();
    let mut g = [0.0; 9];
    for j in 0..9 {
        g[j] = 2.0 * (r1 * a1[j] + r2 * a2[j]);
    }
    (r1 * r1 + r2 * r2, g)
}

/// Per-correspondence residual used by [`TrimmedHomography`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Residual {
    /// `||H b1 - b2||^2` with both points at homogeneous scale 1.
    #[default]
    Direct,
    /// The DLT residual `||[b2]_x H b1||^2` restricted to its first two rows.
    /// Unlike `Direct` it vanishes on exact matches for every scale of `H`,
    /// so it stays exact under the unit-norm constraint.
    Algebraic,
}

/// `f_i(H) = ||H b_{1,i} - b_{2,i}||^2` over homogeneous points with third
/// coordinate 1, `L_i = 2 ||b_{1,i}||^2`; or the algebraic residual, with
/// `L_i = 2 (||a_1||^2 + ||a_2||^2)`.
#[derive(Clone, Debug)]
pub struct TrimmedHomography {
    pairs: Vec<Correspondence>,
    residual: Residual,
}

impl TrimmedHomography {
    pub fn new(pairs: Vec<Correspondence>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("no correspondences".into()));
        }
        Ok(TrimmedHomography {
            pairs,
            residual: Residual::Direct,
        })
    }

    pub fn with_residual(mut self, residual: Residual) -> Self {
        self.residual = residual;
        self
    }

    pub fn residual(&self) -> Residual {
        self.residual
    }

    pub fn pairs(&self) -> &[Correspondence] {
        &self.pairs
    }
}

impl Loss for TrimmedHomography {
    fn count(&self) -> usize {
        self.pairs.len()
    }

    fn shape(&self) -> Shape {
        Shape::matrix(3, 3)
    }

    fn value(&self, i: usize, h: &[f64]) -> f64 {
        let p = &self.pairs[i];
        match self.residual {
            Residual::Direct => homography_loss_and_grad(h, &p.b1(), &p.b2()).0,
            Residual::Algebraic => algebraic_loss_and_grad(h, p).0,
        }
    }

    fn gradient(&self, i: usize, h: &[f64], out: &mut [f64]) {
        let p = &self.pairs[i];
        let g = match self.residual {
            Residual::Direct => homography_loss_and_grad(h, &p.b1(), &p.b2()).1,
            Residual::Algebraic => algebraic_loss_and_grad(h, p).1,
        };
        out.copy_from_slice(&g);
    }

    fn lipschitz(&self, i: usize) -> f64 {
        let p = &self.pairs[i];
        match self.residual {
            Residual::Direct => {
                let b = p.b1();
                2.0 * (b[0] * b[0] + b[1] * b[1] + b[2] * b[2])
            }
            Residual::Algebraic => {
                let (a1, a2) = dlt_rows(p);
                2.0 * a1.iter().chain(&a2).map(|v| v * v).sum::<f64>()
            }
        }
    }
}

/// Direct linear transformation: stacks two constraint rows per pair and
/// returns the right singular vector of the smallest singular value as a
/// row-major 3x3 matrix with unit Frobenius norm and a positive
/// largest-magnitude entry. Needs at least 4 pairs.
pub fn dlt_homography(pairs: &[Correspondence]) -> Result<[f64; 9]> {
    if pairs.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "DLT needs at least 4 correspondences, got {}",
            pairs.len()
        )));
    }
    let rows = (2 * pairs.len()).max(9);
    let mut a = nalgebra::DMatrix::<f64>::zeros(rows, 9);
    for (k, p) in pairs.iter().enumerate() {
        let (a1, a2) = dlt_rows(p);
        for j in 0..9 {
            a[(2 * k, j)] = a1[j];
            a[(2 * k + 1, j)] = a2[j];
        }
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("DLT system".into()));
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let smallest = svd.singular_values[order[0]];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if second - smallest <= 1e-10 * largest.max(1.0) {
        return Err(Error::NonUniqueSolution(format!(
            "degenerate correspondences: two smallest singular values {smallest:e} and {second:e}"
        )));
    }
    let mut h = [0.0; 9];
    for (j, v) in h.iter_mut().enumerate() {
        *v = vt[(order[0], j)];
    }
    Ok(normalize_sign(h))
}

fn normalize_sign(mut h: [f64; 9]) -> [f64; 9] {
    let nrm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut big = 0;
    for j in 1..9 {
        if h[j].abs() > h[big].abs() {
            big = j;
        }
    }
    let s = if h[big] < 0.0 { -1.0 / nrm } else { 1.0 / nrm };
    h.iter_mut().for_each(|v| *v *= s);
    h
}

/// Similarity taking the points to centroid 0 and mean distance sqrt(2).
fn hartley_transform(pts: impl Iterator<Item = [f64; 2]> + Clone) -> [f64; 9] {
    let n = pts.clone().count() as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for p in pts.clone() {
        cx += p[0];
        cy += p[1];
    }
    cx /= n;
    cy /= n;
    let mean_dist = pts
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    [s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0]
}

fn mat3_mul(a: &[f64; 9], b: &[f64; 9]) -> [f64; 9] {
    let mut c = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            c[3 * i + j] = (0..3).map(|k| a[3 * i + k] * b[3 * k + j]).sum();
        }
    }
    c
}

/// [`dlt_homography`] with Hartley's isotropic point normalization.
pub fn dlt_homography_normalized(pairs: &[Correspondence]) -> Result<[f64; 9]> {
    let t1 = hartley_transform(pairs.iter().map(|p| p.src));
    let t2 = hartley_transform(pairs.iter().map(|p| p.dst));
    let map = |t: &[f64; 9], q: [f64; 2]| [t[0] * q[0] + t[2], t[4] * q[1] + t[5]];
    let normalized: Vec<Correspondence> = pairs
        .iter()
        .map(|p| Correspondence {
            src: map(&t1, p.src),
            dst: map(&t2, p.dst),
        })
        .collect();
    let hn = dlt_homography(&normalized)?;
    // inverse of the similarity t2
    let s = t2[0];
    let t2_inv = [1.0 / s, 0.0, -t2[2] / s, 0.0, 1.0 / s, -t2[5] / s, 0.0, 0.0, 1.0];
    Ok(normalize_sign(mat3_mul(&mat3_mul(&t2_inv, &hn), &t1)))
}

/// Refits `H` by DLT on the four kept correspondences with the smallest
/// residual at the solved state. Ties go to the lower index.
pub fn refine_homography(problem: &TrimmedHomography, state: &IterateState) -> Result<[f64; 9]> {
    let mut kept: Vec<(f64, usize)> = state
        .w
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > TRIM_TOL)
        .map(|(i, _)| (problem.value(i, &state.x), i))
        .collect();
    if kept.len() < 4 {
        return Err(Error::InsufficientInliers { kept: kept.len() });
    }
    kept.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let best: Vec<Correspondence> = kept[..4].iter().map(|&(_, i)| problem.pairs[i]).collect();
    dlt_homography(&best)
}

/// Sum of the `keep` smallest algebraic residuals of a unit-norm `h`.
/// Zero exactly when `keep` correspondences are matched without error.
pub fn trimmed_algebraic_residual(pairs: &[Correspondence], h: &[f64; 9], keep: usize) -> f64 {
    let nrm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unit = h.map(|v| v / nrm);
    let mut r: Vec<f64> = pairs.iter().map(|p| algebraic_loss_and_grad(&unit, p).0).collect();
    r.sort_by(f64::total_cmp);
    r.iter().take(keep).sum()
}

/// Relative Frobenius error `||s h/||h|| - t/||t|| ||` after scale and sign
/// alignment; `s = +-1` is chosen by the sign of `<h, t>`.
pub fn homography_error(h: &[f64; 9], truth: &[f64; 9]) -> f64 {
    let nh = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nt = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dot: f64 = h.iter().zip(truth).map(|(a, b)| a * b).sum();
    let s = if dot < 0.0 { -1.0 } else { 1.0 };
    h.iter()
        .zip(truth)
        .map(|(a, b)| (s * a / nh - b / nt).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Result of [`fit_homography`].
pub struct HomographyFit {
    /// Refined homography, unit Frobenius norm.
    pub h: [f64; 9],
    /// Correspondences with nonzero weight at the selected run.
    pub kept: Vec<usize>,
    /// [`trimmed_algebraic_residual`] of `h`.
    pub score: f64,
    pub restart: usize,
    pub outcome: RunOutcome,
}

/// Solves the trimmed problem from `restarts` starting points, each the DLT
/// of four correspondences drawn uniformly without replacement, refines
/// every solution with [`refine_homography`], and keeps the refined
/// homography with the smallest [`trimmed_algebraic_residual`] over the
/// kept count `h`. Restart `r` reseeds a stochastic method with
/// `seed + r`. Starts whose four points are degenerate, and runs that keep
/// fewer than four correspondences, are skipped.
pub fn fit_homography(
    problem: &Problem<TrimmedHomography>,
    method: &Method,
    schedule: &StepSizeSchedule,
    stop: &StopRule,
    restarts: usize,
    seed: u64,
) -> Result<HomographyFit> {
    let n = problem.n();
    if n < 4 || restarts == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 correspondences and 1 restart, got {n} and {restarts}"
        )));
    }
    let keep = match problem.reg_w {
        Regularizer::CappedSimplex { h } => (h.round() as usize).max(4),
        _ => n,
    };
    let pairs = problem.loss.pairs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<HomographyFit> = None;
    let mut last_err = None;
    for r in 0..restarts {
        let four: Vec<Correspondence> = sample(&mut rng, n, 4).into_iter().map(|i| pairs[i]).collect();
        let h0 = match dlt_homography(&four) {
            Ok(h) => h,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let init = initial_state(problem, h0.to_vec())?;
        let outcome = run(problem, &method.reseeded(r as u64), schedule, init, stop)?;
        let h = match refine_homography(&problem.loss, &outcome.state) {
            Ok(h) => h,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let score = trimmed_algebraic_residual(pairs, &h, keep);
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(HomographyFit {
                h,
                kept: outcome.kept(),
                score,
                restart: r,
                outcome,
            });
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::InsufficientInliers { kept: 0 }))
}
