use crate::error::{Error, Result};
use crate::instance::{Loss, Shape};
use crate::linalg::norm_sq;

/// `log sum_j exp(z_j)`, shifted by `max z` so large entries do not overflow.
pub fn lse(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Gradient of [`lse`].
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Scores `z = X^T v` for row-major `X` of shape `p x k`.
fn scores(x: &[f64], v: &[f64], k: usize) -> Vec<f64> {
    let mut z = vec![0.0; k];
    for (j, vj) in v.iter().enumerate() {
        let row = &x[j * k..(j + 1) * k];
        for c in 0..k {
            z[c] += vj * row[c];
        }
    }
    z
}

/// `v (softmax(X^T v) - y)^T` for one example with label `label`.
pub fn grad_softmax_example(x: &[f64], v: &[f64], label: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len() * k];
    write_grad(x, v, label, k, &mut out);
    out
}

fn write_grad(x: &[f64], v: &[f64], label: usize, k: usize, out: &mut [f64]) {
    let mut s = softmax(&scores(x, v, k));
    s[label] -= 1.0;
    for (j, vj) in v.iter().enumerate() {
        let row = &mut out[j * k..(j + 1) * k];
        for c in 0..k {
            row[c] = vj * s[c];
        }
    }
}

/// `f_i(X) = LSE(X^T v_i) - v_i^T X y_i`, `X` row-major `p x K`.
#[derive(Clone, Debug)]
pub struct TrimmedSoftmax {
    features: Vec<f64>,
    labels: Vec<usize>,
    p: usize,
    classes: usize,
}

impl TrimmedSoftmax {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, p: usize, classes: usize) -> Result<Self> {
        if p == 0 || classes == 0 || features.len() != labels.len() * p {
            return Err(Error::InvalidArgument(format!(
                "{} feature values do not form {} rows of width {p}",
                features.len(),
                labels.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {l} of example {i} is out of range for {classes} classes"
            )));
        }
        Ok(TrimmedSoftmax {
            features,
            labels,
            p,
            classes,
        })
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn width(&self) -> usize {
        self.p
    }
}

impl Loss for TrimmedSoftmax {
    fn count(&self) -> usize {
        self.labels.len()
    }

    fn shape(&self) -> Shape {
        Shape::matrix(self.p, self.classes)
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let z = scores(x, self.features(i), self.classes);
        // LSE(z) - z_y >= 0; computed as a shifted sum to keep it exact-ish
        let zy = z[self.labels[i]];
        let shifted: Vec<f64> = z.iter().map(|v| v - zy).collect();
        lse(&shifted).max(0.0)
    }

    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        write_grad(x, self.features(i), self.labels[i], self.classes, out);
    }

    /// Conservative bound `||v_i||^2`.
    fn lipschitz(&self, i: usize) -> f64 {
        norm_sq(self.features(i)).max(f64::MIN_POSITIVE)
    }

    fn cost_hint(&self) -> usize {
        4 * self.p * self.classes
    }
}

/// Fraction of rows whose arg-max score matches the label.
pub fn softmax_accuracy(x: &[f64], features: &[f64], labels: &[usize], classes: usize) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    let p = features.len() / labels.len();
    let hits = labels
        .iter()
        .enumerate()
        .filter(|(i, &l)| {
            let z = scores(x, &features[i * p..(i + 1) * p], classes);
            let best = z
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc })
                .0;
            best == l
        })
        .count();
    hits as f64 / labels.len() as f64
}
