//! Proximal maps and projections for the regularizers used by the solvers.

use crate::error::{Error, Result};
use crate::linalg::{from_dmatrix, norm, to_dmatrix};

/// Feasibility tolerance for constraint residuals of indicator regularizers.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Smallest singular value below which the Stiefel projection is refused.
pub const STIEFEL_RANK_TOL: f64 = 1e-12;

/// Euclidean projection onto the capped simplex `{w in [0,1]^n : sum w = h}`.
///
/// The output is `clip(v - theta, 0, 1)` where `theta` solves the monotone
/// scalar equation `sum_i clip(v_i - theta, 0, 1) = h`. The root is located by
/// scanning the sorted breakpoints `v_i - 1` and `v_i`, then recomputed in
/// closed form from the identified free set.
pub fn project_capped_simplex(v: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = v.len();
    if !(h >= 0.0 && h <= n as f64) {
        return Err(Error::InvalidArgument(format!(
            "capped simplex needs 0 <= h <= n, got h = {h}, n = {n}"
        )));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("capped simplex input".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    // (breakpoint, +1 when a coordinate leaves the upper bound, -1 when it
    // reaches zero)
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * n);
    for &x in v {
        events.push((x - 1.0, 1));
        events.push((x, -1));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));

    // g(theta) = n for theta <= min(v) - 1 and decreases with slope -active.
    let mut g = n as f64;
    let mut active = 0i64;
    let mut prev = events[0].0;
    let mut theta = prev;
    let mut found = h >= g;
    if !found {
        for &(t, delta) in &events {
            let next_g = g - active as f64 * (t - prev);
            if next_g <= h {
                theta = if active > 0 {
                    prev + (g - h) / active as f64
                } else {
                    t
                };
                found = true;
                break;
            }
            g = next_g;
            prev = t;
            active += delta as i64;
        }
        if !found {
            theta = prev;
        }
    }

    // Recompute theta exactly from the free set so that the sum hits h.
    let mut upper = 0usize;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for &x in v {
        let s = x - theta;
        if s >= 1.0 {
            upper += 1;
        } else if s > 0.0 {
            free += 1;
            free_sum += x;
        }
    }
    if free > 0 {
        let refined = (free_sum - (h - upper as f64)) / free as f64;
        // Only accept the refinement if it keeps the same activity pattern.
        let consistent = v.iter().all(|&x| {
            let a = x - theta;
            let b = x - refined;
            (a >= 1.0) == (b >= 1.0) && (a > 0.0) == (b > 0.0)
        });
        if consistent {
            theta = refined;
        }
    }
    Ok(v.iter().map(|&x| (x - theta).clamp(0.0, 1.0)).collect())
}

/// Prox of `x -> (strength/2)||x||^2` with step `step`.
pub fn prox_ridge(v: &[f64], step: f64, strength: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(strength >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge prox needs step > 0 and strength >= 0, got {step}, {strength}"
        )));
    }
    let shrink = 1.0 / (1.0 + step * strength);
    let out: Vec<f64> = v.iter().map(|x| x * shrink).collect();
    if out.iter().all(|x| x.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite("ridge prox output".into()))
    }
}

/// Nearest matrix with orthonormal columns (the polar factor `U V^T` of the
/// thin SVD `M = U S V^T`). `m` is row-major `rows x cols`.
pub fn project_stiefel(m: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    if rows < cols || cols == 0 || m.len() != rows * cols {
        return Err(Error::InvalidArgument(format!(
            "Stiefel projection needs rows >= cols >= 1 and {rows}x{cols} entries, got {}",
            m.len()
        )));
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("Stiefel projection input".into()));
    }
    let mat = to_dmatrix(rows, cols, m);
    let svd = mat.svd(true, true);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin < STIEFEL_RANK_TOL {
        return Err(Error::DegenerateProjection(format!(
            "rank-deficient matrix (smallest singular value {smin:e})"
        )));
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    Ok(from_dmatrix(&(u * vt)))
}

/// Radial projection onto the unit Frobenius sphere.
pub fn project_frobenius_sphere(h: &[f64]) -> Result<Vec<f64>> {
    let nrm = norm(h);
    if !nrm.is_finite() {
        return Err(Error::NonFinite("sphere projection input".into()));
    }
    if nrm <= 1e-12 {
        return Err(Error::DegenerateProjection(
            "near-zero input: every unit point is equidistant".into(),
        ));
    }
    Ok(h.iter().map(|x| x / nrm).collect())
}

/// Projection onto `{1}`: trimming switched off.
pub fn prox_indicator_all_ones(v: &[f64]) -> Vec<f64> {
    vec![1.0; v.len()]
}
