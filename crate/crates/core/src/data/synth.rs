use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::problems::{Correspondence, TrimmedHomography, TrimmedLS, TrimmedPCA, TrimmedSoftmax};

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Exactly `floor(frac * n)` distinct indices, as a mask.
fn planted_mask(rng: &mut ChaCha8Rng, n: usize, frac: f64) -> Vec<bool> {
    let count = ((frac * n as f64).floor() as usize).min(n);
    let mut mask = vec![false; n];
    for i in sample(rng, n, count) {
        mask[i] = true;
    }
    mask
}

#[derive(Clone, Debug)]
pub struct LsDataset {
    /// Row-major `n x p`.
    pub features: Vec<f64>,
    pub targets: Vec<f64>,
    pub p: usize,
    pub x_true: Vec<f64>,
    pub outliers: Vec<bool>,
}

impl LsDataset {
    pub fn problem(&self) -> TrimmedLS {
        TrimmedLS::new(self.features.clone(), self.targets.clone(), self.p)
            .expect("generator produces consistent shapes")
    }
}

/// Gaussian design, `b_i = <a_i, x_true> + N(0, noise_sd^2)`, and a
/// `outlier_frac` share of targets shifted by `+-10 ||x_true||`.
pub fn gen_trimmed_ls(
    n: usize,
    p: usize,
    outlier_frac: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<LsDataset> {
    if !(0.0..0.5).contains(&outlier_frac) || n == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n, p >= 1 and outlier_frac in [0, 0.5), got {n}, {p}, {outlier_frac}"
        )));
    }
    let mut rng = rng_for(seed);
    let x_true: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
    let features: Vec<f64> = (0..n * p).map(|_| normal(&mut rng)).collect();
    let mut targets: Vec<f64> = (0..n)
        .map(|i| dot(&features[i * p..(i + 1) * p], &x_true) + noise_sd * normal(&mut rng))
        .collect();
    let outliers = planted_mask(&mut rng, n, outlier_frac);
    let shift = 10.0 * norm(&x_true);
    for (t, &bad) in targets.iter_mut().zip(&outliers) {
        if bad {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            *t += sign * shift;
        }
    }
    Ok(LsDataset {
        features,
        targets,
        p,
        x_true,
        outliers,
    })
}

#[derive(Clone, Debug)]
pub struct SoftmaxDataset {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub p: usize,
    pub classes: usize,
    /// Labels that were shifted; all false before contamination.
    pub outliers: Vec<bool>,
}

impl SoftmaxDataset {
    pub fn problem(&self) -> TrimmedSoftmax {
        TrimmedSoftmax::new(self.features.clone(), self.labels.clone(), self.p, self.classes)
            .expect("generator produces consistent shapes")
    }

    /// Shifts a `frac` share of the labels by one class.
    pub fn contaminated(&self, frac: f64, seed: u64) -> SoftmaxDataset {
        let (labels, outliers) = contaminate_labels(&self.labels, frac, self.classes, seed);
        SoftmaxDataset {
            labels,
            outliers,
            ..self.clone()
        }
    }
}

/// Gaussian class clusters: class `c` has a random mean of norm
/// `separation` and unit isotropic spread. Labels are uniform.
pub fn gen_softmax(
    n: usize,
    p: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> Result<SoftmaxDataset> {
    if n == 0 || p == 0 || classes == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n, p, classes >= 1, got {n}, {p}, {classes}"
        )));
    }
    let mut rng = rng_for(seed);
    let mut means = Vec::with_capacity(classes * p);
    for _ in 0..classes {
        let m: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
        let s = separation / norm(&m).max(1e-300);
        means.extend(m.into_iter().map(|v| v * s));
    }
    let mut features = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..classes);
        labels.push(c);
        for j in 0..p {
            features.push(means[c * p + j] + normal(&mut rng));
        }
    }
    Ok(SoftmaxDataset {
        features,
        labels,
        p,
        classes,
        outliers: vec![false; n],
    })
}

/// Shifts exactly `floor(frac * n)` uniformly chosen labels by one, modulo
/// `classes`. Returns the new labels and the mask of shifted examples.
pub fn contaminate_labels(
    labels: &[usize],
    frac: f64,
    classes: usize,
    seed: u64,
) -> (Vec<usize>, Vec<bool>) {
    let mut rng = rng_for(seed);
    let mask = planted_mask(&mut rng, labels.len(), frac.clamp(0.0, 1.0));
    let out = labels
        .iter()
        .zip(&mask)
        .map(|(&l, &m)| if m { (l + 1) % classes.max(1) } else { l })
        .collect();
    (out, mask)
}

#[derive(Clone, Debug)]
pub struct PcaDataset {
    /// Row-major `m x n`; examples are columns.
    pub data: Vec<f64>,
    pub m: usize,
    pub n: usize,
    /// Orthonormal basis (row-major `m x rank`) of the inlier subspace.
    pub basis: Vec<f64>,
    pub outliers: Vec<bool>,
}

impl PcaDataset {
    pub fn problem(&self, rank: usize) -> Result<TrimmedPCA> {
        TrimmedPCA::from_matrix(&self.data, self.m, self.n, rank)
    }
}

/// Inlier columns `B c + noise` near a random `rank`-dimensional subspace
/// (`c ~ N(0, I)`); an `outlier_frac` share of columns is replaced by
/// isotropic Gaussian directions scaled to `magnitude` times the average
/// inlier norm.
pub fn gen_pca(
    m: usize,
    n: usize,
    rank: usize,
    outlier_frac: f64,
    magnitude: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<PcaDataset> {
    if rank == 0 || rank > m || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= rank <= m and n >= 1, got m = {m}, n = {n}, rank = {rank}"
        )));
    }
    let mut rng = rng_for(seed);
    let raw: Vec<f64> = (0..m * rank).map(|_| normal(&mut rng)).collect();
    let basis = crate::prox::project_stiefel(&raw, m, rank)?;
    let outliers = planted_mask(&mut rng, n, outlier_frac);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let c: Vec<f64> = (0..rank).map(|_| normal(&mut rng)).collect();
        let col: Vec<f64> = (0..m)
            .map(|r| {
                (0..rank).map(|j| basis[r * rank + j] * c[j]).sum::<f64>()
                    + noise_sd * normal(&mut rng)
            })
            .collect();
        columns.push(col);
    }
    let inlier_norm = {
        let (s, cnt) = columns
            .iter()
            .zip(&outliers)
            .filter(|(_, &o)| !o)
            .fold((0.0, 0usize), |(s, c), (col, _)| (s + norm(col), c + 1));
        if cnt > 0 {
            s / cnt as f64
        } else {
            1.0
        }
    };
    for (col, &bad) in columns.iter_mut().zip(&outliers) {
        if bad {
            let dir: Vec<f64> = (0..m).map(|_| normal(&mut rng)).collect();
            let s = magnitude * inlier_norm / norm(&dir).max(1e-300);
            *col = dir.into_iter().map(|v| v * s).collect();
        }
    }
    let mut data = vec![0.0; m * n];
    for (i, col) in columns.iter().enumerate() {
        for r in 0..m {
            data[r * n + i] = col[r];
        }
    }
    Ok(PcaDataset {
        data,
        m,
        n,
        basis,
        outliers,
    })
}

#[derive(Clone, Debug)]
pub struct HomographyScene {
    pub pairs: Vec<Correspondence>,
    /// Ground-truth homography, unit Frobenius norm, positive
    /// largest-magnitude entry.
    pub truth: [f64; 9],
    /// True for spurious matches.
    pub outliers: Vec<bool>,
}

impl HomographyScene {
    pub fn problem(&self) -> TrimmedHomography {
        TrimmedHomography::new(self.pairs.clone()).expect("non-empty scene")
    }
}

/// Source points uniform on `[-1, 1]^2`, mapped through a random
/// near-identity homography; a `spurious_frac` share of destinations is
/// replaced by uniform points on `[-1.5, 1.5]^2`. Inlier destinations get
/// `N(0, noise_sd^2)` jitter.
pub fn gen_homography(
    n: usize,
    spurious_frac: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<HomographyScene> {
    if n < 4 || !(0.0..1.0).contains(&spurious_frac) {
        return Err(Error::InvalidArgument(format!(
            "need n >= 4 and spurious_frac in [0, 1), got {n}, {spurious_frac}"
        )));
    }
    let mut rng = rng_for(seed);
    let u = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| lo + (hi - lo) * rng.random::<f64>();
    let h = [
        1.0 + u(-0.2, 0.2, &mut rng),
        u(-0.2, 0.2, &mut rng),
        u(-0.3, 0.3, &mut rng),
        u(-0.2, 0.2, &mut rng),
        1.0 + u(-0.2, 0.2, &mut rng),
        u(-0.3, 0.3, &mut rng),
        u(-0.1, 0.1, &mut rng),
        u(-0.1, 0.1, &mut rng),
        1.0,
    ];
    let nrm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let truth = h.map(|v| v / nrm);
    let outliers = planted_mask(&mut rng, n, spurious_frac);
    let mut pairs = Vec::with_capacity(n);
    for &bad in &outliers {
        let (x, y) = (u(-1.0, 1.0, &mut rng), u(-1.0, 1.0, &mut rng));
        let (x2, y2) = if bad {
            (u(-1.5, 1.5, &mut rng), u(-1.5, 1.5, &mut rng))
        } else {
            let z = h[6] * x + h[7] * y + h[8];
            (
                (h[0] * x + h[1] * y + h[2]) / z + noise_sd * normal(&mut rng),
                (h[3] * x + h[4] * y + h[5]) / z + noise_sd * normal(&mut rng),
            )
        };
        pairs.push(Correspondence::new(x, y, x2, y2));
    }
    Ok(HomographyScene {
        pairs,
        truth,
        outliers,
    })
}
