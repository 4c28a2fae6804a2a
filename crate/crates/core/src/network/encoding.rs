use std::f64::consts::PI;

use ndarray::{s, Array2};

use crate::geometry::Point3;

/// Progressive weight of band `j` at encoding progress `alpha`: 0 before the
/// band opens, a cosine ramp while `j < alpha < j + 1`, then 1.
pub fn band_weight(j: usize, alpha: f64) -> f64 {
    let t = alpha - j as f64;
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        (1.0 - (t * PI).cos()) / 2.0
    }
}

/// Weighted sinusoidal encoding of `p` with `bands` frequencies (`6 * bands`
/// values): for each coordinate, `sin(2^j π p), cos(2^j π p)` for every `j`.
pub fn positional_encode(p: &Point3, bands: usize, alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(6 * bands);
    for c in 0..3 {
        for j in 0..bands {
            let w = band_weight(j, alpha);
            let (sin, cos) = ((1u64 << j) as f64 * PI * p[c]).sin_cos();
            out.push(w * sin);
            out.push(w * cos);
        }
    }
    out
}

/// Feature matrix `φ` (`feature_dim × B`) and, when `with_tangents`, the
/// three input-tangent blocks appended as extra columns
/// (`feature_dim × 4B`: values, then ∂/∂x, ∂/∂y, ∂/∂z).
pub(crate) fn features(points: &[Point3], weights: &[f64], with_tangents: bool) -> Array2<f64> {
    let b = points.len();
    let bands = weights.len();
    let dim = 3 + 6 * bands;
    let cols = if with_tangents { 4 * b } else { b };
    let mut a = Array2::<f64>::zeros((dim, cols));
    for (i, p) in points.iter().enumerate() {
        for c in 0..3 {
            a[[c, i]] = p[c];
            if with_tangents {
                a[[c, (c + 1) * b + i]] = 1.0;
            }
            for (j, &w) in weights.iter().enumerate() {
                let row = 3 + 2 * (c * bands + j);
                let freq = (1u64 << j) as f64 * PI;
                let (sin, cos) = (freq * p[c]).sin_cos();
                a[[row, i]] = w * sin;
                a[[row + 1, i]] = w * cos;
                if with_tangents {
                    a[[row, (c + 1) * b + i]] = w * freq * cos;
                    a[[row + 1, (c + 1) * b + i]] = -w * freq * sin;
                }
            }
        }
    }
    a
}

/// Chain rule through `φ`: turns a feature cotangent (`feature_dim × B`)
/// into per-point input gradients.
pub(crate) fn pull_back(points: &[Point3], weights: &[f64], cotangent: &Array2<f64>) -> Vec<[f64; 3]> {
    let bands = weights.len();
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let col = cotangent.slice(s![.., i]);
            let mut g = [col[0], col[1], col[2]];
            for c in 0..3 {
                for (j, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let row = 3 + 2 * (c * bands + j);
                    let freq = (1u64 << j) as f64 * PI;
                    let (sin, cos) = (freq * p[c]).sin_cos();
                    g[c] += w * freq * (col[row] * cos - col[row + 1] * sin);
                }
            }
            g
        })
        .collect()
}
