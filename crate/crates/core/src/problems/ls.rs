use crate::error::{Error, Result};
use crate::instance::{Loss, Shape};
use crate::linalg::{dot, norm_sq};

/// `f_i(x) = 0.5 (<a_i, x> - b_i)^2` with `L_i = ||a_i||^2`.
#[derive(Clone, Debug)]
pub struct TrimmedLS {
    features: Vec<f64>,
    targets: Vec<f64>,
    p: usize,
}

impl TrimmedLS {
    /// `features` is row-major `n x p`.
    pub fn new(features: Vec<f64>, targets: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 || features.len() != targets.len() * p {
            return Err(Error::InvalidArgument(format!(
                "{} feature values do not form {} rows of width {p}",
                features.len(),
                targets.len()
            )));
        }
        Ok(TrimmedLS {
            features,
            targets,
            p,
        })
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn width(&self) -> usize {
        self.p
    }

    fn residual(&self, i: usize, x: &[f64]) -> f64 {
        dot(self.features(i), x) - self.targets[i]
    }
}

impl Loss for TrimmedLS {
    fn count(&self) -> usize {
        self.targets.len()
    }

    fn shape(&self) -> Shape {
        Shape::vector(self.p)
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let r = self.residual(i, x);
        0.5 * r * r
    }

    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let r = self.residual(i, x);
        for (o, a) in out.iter_mut().zip(self.features(i)) {
            *o = r * a;
        }
    }

    fn lipschitz(&self, i: usize) -> f64 {
        norm_sq(self.features(i)).max(f64::MIN_POSITIVE)
    }
}
