//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

/// Projection onto `{x in [0,1]^n : sum x = h}` by enumerating every
/// assignment of coordinates to {at 0, at 1, free} and keeping the KKT
/// points; returns the closest one to `v`.
pub fn capped_simplex_kkt(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let total = 3usize.pow(n as u32);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let tol = 1e-12;
    for code in 0..total {
        let mut c = code;
        let mut state = vec![0u8; n];
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let ones = state.iter().filter(|&&s| s == 1).count() as f64;
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        // the multiplier theta with x_i = v_i - theta on the free set
        let thetas: Vec<f64> = if free.is_empty() {
            if (ones - h).abs() > 1e-9 {
                continue;
            }
            let lo = (0..n)
                .filter(|&i| state[i] == 0)
                .map(|i| v[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let hi = (0..n)
                .filter(|&i| state[i] == 1)
                .map(|i| v[i] - 1.0)
                .fold(f64::INFINITY, f64::min);
            if lo > hi + tol {
                continue;
            }
            vec![if lo.is_finite() { lo } else { hi.min(0.0) }]
        } else {
            let s: f64 = free.iter().map(|&i| v[i]).sum();
            vec![(s + ones - h) / free.len() as f64]
        };
        for theta in thetas {
            let mut x = vec![0.0; n];
            let mut ok = true;
            for i in 0..n {
                match state[i] {
                    0 => ok &= v[i] - theta <= tol,
                    1 => {
                        x[i] = 1.0;
                        ok &= v[i] - theta >= 1.0 - tol;
                    }
                    _ => {
                        x[i] = v[i] - theta;
                        ok &= x[i] >= -tol && x[i] <= 1.0 + tol;
                    }
                }
            }
            if !ok {
                continue;
            }
            let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
    }
    best.expect("capped simplex is non-empty for 0 <= h <= n").1
}

/// Gradient of `f` at `x` by central differences with step `eps`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|j| {
            y[j] = x[j] + eps;
            let up = f(&y);
            y[j] = x[j] - eps;
            let down = f(&y);
            y[j] = x[j];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Least-squares solution of `min ||A x - b||^2 + lambda ||x||^2` over the
/// rows in `rows`, by the normal equations and Gaussian elimination with
/// partial pivoting.
pub fn normal_equations(a: &[f64], b: &[f64], p: usize, rows: &[usize], lambda: f64) -> Vec<f64> {
    let mut m = vec![0.0; p * (p + 1)];
    for &i in rows {
        let ai = &a[i * p..(i + 1) * p];
        for r in 0..p {
            for c in 0..p {
                m[r * (p + 1) + c] += ai[r] * ai[c];
            }
            m[r * (p + 1) + p] += ai[r] * b[i];
        }
    }
    for r in 0..p {
        m[r * (p + 1) + r] += lambda;
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&x, &y| m[x * (p + 1) + col].abs().total_cmp(&m[y * (p + 1) + col].abs()))
            .unwrap();
        for c in 0..=p {
            m.swap(col * (p + 1) + c, piv * (p + 1) + c);
        }
        let d = m[col * (p + 1) + col];
        for r in 0..p {
            if r != col {
                let f = m[r * (p + 1) + col] / d;
                for c in col..=p {
                    m[r * (p + 1) + c] -= f * m[col * (p + 1) + c];
                }
            }
        }
    }
    (0..p).map(|r| m[r * (p + 1) + p] / m[r * (p + 1) + r]).collect()
}

/// Step-size formulas written out term by term from the printed
/// statements, with no shared code with the library.
pub mod steps {
    pub struct Plan {
        pub n: usize,
        pub b: usize,
        pub q: f64,
        pub rho: Vec<f64>,
        pub bounds: Vec<f64>,
        pub l: f64,
        pub eps0: f64,
    }

    fn qp(p: &Plan) -> f64 {
        1.0 - p.q
    }

    fn sum_b(p: &Plan) -> f64 {
        p.bounds.iter().sum()
    }

    pub fn eta_sublinear(p: &Plan, gamma: f64) -> f64 {
        let n = p.n as f64;
        let mut s = 0.0;
        for i in 0..p.n {
            let bl = p.bounds[i] * p.l;
            s += qp(p) * (1.0 + p.eps0) * bl * bl
                / (2.0 * p.b as f64 * (1.0 - (qp(p) * (1.0 - p.rho[i])).sqrt()).powi(2));
        }
        2.0 + 4.0 * gamma * ((s / n).sqrt() + 4.0 * p.l / n * sum_b(p))
    }

    pub fn gamma_sublinear(p: &Plan) -> f64 {
        let n = p.n as f64;
        let mut s = 0.0;
        for i in 0..p.n {
            s += qp(p) * (1.0 + p.eps0) * p.bounds[i].powi(2)
                / (2.0 * p.b as f64 * (1.0 - (qp(p) * (1.0 - p.rho[i])).sqrt()).powi(2));
        }
        1.0 / (4.0 * p.l * (s / n).sqrt() + p.l / n * sum_b(p))
    }

    pub fn eta_linear(p: &Plan, gamma: f64) -> f64 {
        let n = p.n as f64;
        let mut s = 0.0;
        for i in 0..p.n {
            let t = qp(p) * (1.0 - p.rho[i]);
            let bl = p.bounds[i] * p.l;
            s += qp(p) * (1.0 + p.eps0) * bl * bl
                / (2.0 * p.b as f64 * t.sqrt() * (1.0 - t.powf(0.25)).powi(2));
        }
        2.0 + 4.0 * gamma * ((s / n).sqrt() + p.l / n * sum_b(p))
    }

    pub fn gamma_linear(p: &Plan) -> f64 {
        let n = p.n as f64;
        let mut s = 0.0;
        for i in 0..p.n {
            let t = qp(p) * (1.0 - p.rho[i]);
            s += qp(p) * (1.0 + p.eps0) * p.bounds[i].powi(2)
                / (2.0 * p.b as f64 * t.sqrt() * (1.0 - t.powf(0.25)).powi(2));
        }
        1.0 / (4.0 * p.l * (s / n).sqrt() + p.l / n * sum_b(p))
    }

    pub fn tau_saga(n: usize, gamma: f64, eta: f64) -> f64 {
        (n as f64 - 1.0) * gamma / eta
    }

    pub fn tau_svrg(n: usize, b: usize, gamma: f64, eta: f64) -> f64 {
        let z = (1.0 - 1.0 / n as f64).powf(b as f64);
        (1.0 - z) * z * gamma / eta
    }

    pub fn rho_saga(n: usize, b: usize) -> f64 {
        1.0 - (1.0 - 1.0 / n as f64).powf(b as f64)
    }

    /// The SAGA corollary's closed form with `q' = 1 - 1/n`.
    pub fn gamma_saga_corollary(n: usize, b: usize, bounds: &[f64], l: f64, eps0: f64) -> f64 {
        let nf = n as f64;
        let z = 1.0 - 1.0 / nf;
        let s: f64 = bounds
            .iter()
            .map(|bi| z * (1.0 + eps0) * bi * bi / (2.0 * b as f64 * (1.0 - z.powf(b as f64 + 1.0).sqrt()).powi(2)))
            .sum();
        1.0 / (4.0 * l * (s / nf).sqrt() + l / nf * bounds.iter().sum::<f64>())
    }

    /// The SVRG corollary's closed form with `q' = (1 - 1/n)^b`.
    pub fn gamma_svrg_corollary(n: usize, b: usize, bounds: &[f64], l: f64, eps0: f64) -> f64 {
        let nf = n as f64;
        let zb = (1.0 - 1.0 / nf).powf(b as f64);
        let s: f64 = bounds
            .iter()
            .map(|bi| zb * (1.0 + eps0) * bi * bi / (2.0 * b as f64 * (1.0 - zb.sqrt()).powi(2)))
            .sum();
        1.0 / (4.0 * l * (s / nf).sqrt() + l / nf * bounds.iter().sum::<f64>())
    }
}
