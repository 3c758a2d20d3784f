//! Normalized direct linear transform.

use nalgebra::{DMatrix, Matrix3};

use super::Correspondence;
use crate::error::{Error, Result};

/// Similarity that moves the centroid to the origin and scales the mean
/// distance from it to sqrt(2).
fn normalizing_transform(pts: impl Iterator<Item = [f64; 2]> + Clone) -> Result<Matrix3<f64>> {
    let n = pts.clone().count() as f64;
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(ax, ay), p| (ax + p[0], ay + p[1]));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = pts.map(|p| (p[0] - cx).hypot(p[1] - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::DegenerateSample("coincident points"));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn apply(t: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    [t[(0, 0)] * p[0] + t[(0, 2)], t[(1, 1)] * p[1] + t[(1, 2)]]
}

/// Estimates H with `target ~ H * source` from four or more correspondences.
///
/// With more than four correspondences the algebraic error is minimized;
/// a second near-zero singular value marks a rank-deficient configuration.
pub(super) fn normalized_dlt(corrs: &[Correspondence]) -> Result<Matrix3<f64>> {
    let n = corrs.len();
    if n < 4 {
        return Err(Error::SampleSize { expected: 4, got: n });
    }
    let t_src = normalizing_transform(corrs.iter().map(|c| c.source()))?;
    let t_dst = normalizing_transform(corrs.iter().map(|c| c.target()))?;

    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in corrs.iter().enumerate() {
        let [x, y] = apply(&t_src, c.source());
        let [u, v] = apply(&t_dst, c.target());
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
        a.row_mut(r + 1).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]);
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateSample("svd failed"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = order[0];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if second <= 1e-10 * largest {
        return Err(Error::DegenerateSample("rank-deficient correspondence set"));
    }

    let h_vec: Vec<f64> = v_t.row(smallest).iter().copied().collect();
    let h_norm = Matrix3::from_row_slice(&h_vec);
    let t_dst_inv = t_dst.try_inverse().ok_or(Error::DegenerateSample("normalization"))?;
    let h = t_dst_inv * h_norm * t_src;
    if h.iter().any(|x| !x.is_finite()) || h.determinant().abs() < 1e-300 {
        return Err(Error::DegenerateSample("singular homography"));
    }
    Ok(h)
}
