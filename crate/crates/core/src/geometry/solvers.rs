use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};

use super::homography::normalized_dlt;
use super::{
    Correspondence, Datum, Instance, ModelClass, Point, COLLINEARITY_TOLERANCE,
    PARALLEL_TOLERANCE,
};
use crate::error::{Error, Result};

fn points_of(class: ModelClass, data: &[Datum]) -> Result<Vec<Point>> {
    let want = class.data_kind();
    data.iter()
        .map(|d| match d {
            Datum::Point(p) if d.kind() == want => Ok(*p),
            _ => Err(Error::DatumMismatch(class.name())),
        })
        .collect()
}

fn correspondences_of(class: ModelClass, data: &[Datum]) -> Result<Vec<Correspondence>> {
    data.iter()
        .map(|d| d.as_correspondence().copied().ok_or(Error::DatumMismatch(class.name())))
        .collect()
}

fn squared_bbox_diagonal<'a>(pts: impl Iterator<Item = &'a [f64]>) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for (k, &c) in p.iter().enumerate() {
            lo[k] = lo[k].min(c);
            hi[k] = hi[k].max(c);
        }
    }
    lo.iter()
        .zip(&hi)
        .filter(|(l, h)| l.is_finite() && h.is_finite())
        .map(|(l, h)| (h - l).powi(2))
        .sum()
}

fn triangle_is_degenerate(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
    let diag2 = squared_bbox_diagonal([&a[..], &b[..], &c[..]].into_iter());
    diag2 == 0.0 || area < COLLINEARITY_TOLERANCE * diag2
}

fn any_three_collinear(pts: &[[f64; 2]]) -> bool {
    let n = pts.len();
    (0..n).any(|i| {
        (i + 1..n).any(|j| (j + 1..n).any(|k| triangle_is_degenerate(pts[i], pts[j], pts[k])))
    })
}

fn line_from_normal(normal: Vector2<f64>, through: Vector2<f64>) -> Result<Instance> {
    let alpha = normal.y.atan2(normal.x);
    Instance::new(ModelClass::Line2D, vec![alpha, -normal.dot(&through)])
}

/// Estimates an instance from exactly `class.minimal_sample_size()` data.
pub fn fit_minimal(class: ModelClass, sample: &[Datum]) -> Result<Instance> {
    let m = class.minimal_sample_size();
    if sample.len() != m {
        return Err(Error::SampleSize { expected: m, got: sample.len() });
    }
    match class {
        ModelClass::Line2D => {
            let p = points_of(class, sample)?;
            let a = Vector2::new(p[0].x(), p[0].y());
            let b = Vector2::new(p[1].x(), p[1].y());
            let d = b - a;
            let len = d.norm();
            if len <= 1e-12 * (1.0 + a.norm().max(b.norm())) {
                return Err(Error::DegenerateSample("coincident points"));
            }
            line_from_normal(Vector2::new(-d.y, d.x) / len, a)
        }
        ModelClass::Circle2D => {
            let p = points_of(class, sample)?;
            let [a, b, c] = [0, 1, 2].map(|i| [p[i].x(), p[i].y()]);
            if triangle_is_degenerate(a, b, c) {
                return Err(Error::DegenerateSample("collinear points"));
            }
            circumcircle(a, b, c)
        }
        ModelClass::Homography => {
            let corrs = correspondences_of(class, sample)?;
            let src: Vec<_> = corrs.iter().map(|c| c.source()).collect();
            let dst: Vec<_> = corrs.iter().map(|c| c.target()).collect();
            if any_three_collinear(&src) || any_three_collinear(&dst) {
                return Err(Error::DegenerateSample("three collinear points"));
            }
            let h = normalized_dlt(&corrs)?;
            Instance::new(class, h.transpose().as_slice().to_vec())
        }
        ModelClass::Plane3D => {
            let p = points_of(class, sample)?;
            let [a, b, c] = [0, 1, 2].map(|i| p[i].vec3());
            let n = (b - a).cross(&(c - a));
            let diag2 = squared_bbox_diagonal(p.iter().map(|q| q.coords()));
            if diag2 == 0.0 || 0.5 * n.norm() < COLLINEARITY_TOLERANCE * diag2 {
                return Err(Error::DegenerateSample("collinear points"));
            }
            let n = n.normalize();
            Instance::new(class, vec![n.x, n.y, n.z, -n.dot(&a)])
        }
        ModelClass::Cylinder3D => {
            let p = points_of(class, sample)?;
            cylinder_from_oriented_pair(&p[0], &p[1])
        }
        ModelClass::Outlier => Err(Error::DegenerateSample("outlier class has no solver")),
    }
}

fn circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Result<Instance> {
    // translate so that `a` is the origin
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    let r = ux.hypot(uy);
    if !r.is_finite() || r == 0.0 {
        return Err(Error::DegenerateSample("collinear points"));
    }
    Instance::new(ModelClass::Circle2D, vec![ux + a[0], uy + a[1], r])
}

fn orthonormal_basis(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = d.cross(&helper).normalize();
    let v = d.cross(&u);
    (u, v)
}

fn cylinder_from_oriented_pair(p1: &Point, p2: &Point) -> Result<Instance> {
    let (Some(n1), Some(n2)) = (p1.normal(), p2.normal()) else {
        return Err(Error::DegenerateSample("cylinder samples need normals"));
    };
    let (n1, n2) = (Vector3::from(n1), Vector3::from(n2));
    let axis = n1.cross(&n2);
    if axis.norm() < PARALLEL_TOLERANCE {
        return Err(Error::DegenerateSample("parallel normals"));
    }
    let axis = axis.normalize();
    let (u, v) = orthonormal_basis(&axis);
    let proj = |x: &Vector3<f64>| Vector2::new(x.dot(&u), x.dot(&v));
    let (q1, q2) = (proj(&p1.vec3()), proj(&p2.vec3()));
    let (m1, m2) = (proj(&n1), proj(&n2));

    let chord = q2 - q1;
    let chord_len = chord.norm();
    if chord_len <= 1e-12 * (1.0 + q1.norm().max(q2.norm())) {
        return Err(Error::DegenerateSample("coincident points"));
    }
    // intersection of the two normal lines in the cross-section plane
    let sys = Matrix2::new(m1.x, -m2.x, m1.y, -m2.y);
    let ts = sys.try_inverse().ok_or(Error::DegenerateSample("parallel normals"))? * chord;
    let c0 = q1 + m1 * ts.x;
    // snap onto the perpendicular bisector so both samples are equidistant
    let mid = (q1 + q2) * 0.5;
    let bis = Vector2::new(-chord.y, chord.x) / chord_len;
    let center = mid + bis * (c0 - mid).dot(&bis);
    let r = (q1 - center).norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DegenerateSample("zero radius"));
    }
    let a = u * center.x + v * center.y;
    Instance::new(ModelClass::Cylinder3D, vec![a.x, a.y, a.z, axis.x, axis.y, axis.z, r])
}

fn centroid<const D: usize>(pts: &[[f64; D]]) -> [f64; D] {
    let n = pts.len() as f64;
    let mut c = [0.0; D];
    for p in pts {
        for k in 0..D {
            c[k] += p[k];
        }
    }
    c.map(|x| x / n)
}

/// Algebraic (Kasa) circle fit; returns (cx, cy, r).
fn kasa(pts: &[[f64; 2]]) -> Result<(f64, f64, f64)> {
    let c = centroid(pts);
    let scale = pts.iter().map(|p| (p[0] - c[0]).hypot(p[1] - c[1])).sum::<f64>() / pts.len() as f64;
    if !(scale > 0.0) {
        return Err(Error::DegenerateSample("coincident points"));
    }
    let n = pts.len();
    let mut a = DMatrix::<f64>::zeros(n, 3);
    let mut rhs = DVector::<f64>::zeros(n);
    for (i, p) in pts.iter().enumerate() {
        let (x, y) = ((p[0] - c[0]) / scale, (p[1] - c[1]) / scale);
        a[(i, 0)] = x;
        a[(i, 1)] = y;
        a[(i, 2)] = 1.0;
        rhs[i] = -(x * x + y * y);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax {
        return Err(Error::DegenerateSample("collinear points"));
    }
    let sol = svd.solve(&rhs, 0.0).map_err(|_| Error::DegenerateSample("circle fit"))?;
    let (cx, cy) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = cx * cx + cy * cy - sol[2];
    if !(r2 > 0.0) {
        return Err(Error::DegenerateSample("imaginary circle"));
    }
    Ok((cx * scale + c[0], cy * scale + c[1], r2.sqrt() * scale))
}

/// Least-squares re-estimation over an arbitrary support of at least
/// `class.minimal_sample_size()` data.
pub fn refit(class: ModelClass, data: &[Datum]) -> Result<Instance> {
    let m = class.minimal_sample_size();
    if data.len() < m || class == ModelClass::Outlier {
        return Err(Error::SampleSize { expected: m, got: data.len() });
    }
    match class {
        ModelClass::Line2D => {
            let pts: Vec<[f64; 2]> = points_of(class, data)?.iter().map(|p| [p.x(), p.y()]).collect();
            let c = centroid(&pts);
            let mut cov = Matrix2::zeros();
            for p in &pts {
                let d = Vector2::new(p[0] - c[0], p[1] - c[1]);
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let (imin, imax) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
            if !(eig.eigenvalues[imax] > 0.0) {
                return Err(Error::DegenerateSample("coincident points"));
            }
            let normal = eig.eigenvectors.column(imin).into_owned();
            line_from_normal(normal, Vector2::new(c[0], c[1]))
        }
        ModelClass::Plane3D => {
            let pts: Vec<[f64; 3]> =
                points_of(class, data)?.iter().map(|p| [p.x(), p.y(), p.z()]).collect();
            let c = centroid(&pts);
            let mut cov = Matrix3::zeros();
            for p in &pts {
                let d = Vector3::new(p[0] - c[0], p[1] - c[1], p[2] - c[2]);
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let mut order = [0usize, 1, 2];
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            if eig.eigenvalues[order[1]] <= 1e-12 * eig.eigenvalues[order[2]].max(f64::MIN_POSITIVE) {
                return Err(Error::DegenerateSample("collinear points"));
            }
            let n = eig.eigenvectors.column(order[0]).into_owned();
            let cv = Vector3::from(c);
            Instance::new(class, vec![n.x, n.y, n.z, -n.dot(&cv)])
        }
        ModelClass::Circle2D => {
            let pts: Vec<[f64; 2]> = points_of(class, data)?.iter().map(|p| [p.x(), p.y()]).collect();
            let (cx, cy, r) = kasa(&pts)?;
            Instance::new(class, vec![cx, cy, r])
        }
        ModelClass::Homography => {
            let corrs = correspondences_of(class, data)?;
            if corrs.len() == 4 {
                return fit_minimal(class, data);
            }
            let h = normalized_dlt(&corrs)?;
            Instance::new(class, h.transpose().as_slice().to_vec())
        }
        ModelClass::Cylinder3D => {
            let pts = points_of(class, data)?;
            if pts.len() == 2 {
                return fit_minimal(class, data);
            }
            let mut scatter = Matrix3::zeros();
            for p in &pts {
                let n = Vector3::from(p.normal().ok_or(Error::DegenerateSample("cylinder samples need normals"))?);
                scatter += n * n.transpose();
            }
            let eig = SymmetricEigen::new(scatter);
            let mut order = [0usize, 1, 2];
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            if eig.eigenvalues[order[1]] <= 1e-9 * eig.eigenvalues[order[2]] {
                return Err(Error::DegenerateSample("parallel normals"));
            }
            let axis = eig.eigenvectors.column(order[0]).into_owned();
            let (u, v) = orthonormal_basis(&axis);
            let section: Vec<[f64; 2]> =
                pts.iter().map(|p| [p.vec3().dot(&u), p.vec3().dot(&v)]).collect();
            let (cx, cy, r) = kasa(&section)?;
            let a = u * cx + v * cy;
            Instance::new(class, vec![a.x, a.y, a.z, axis.x, axis.y, axis.z, r])
        }
        ModelClass::Outlier => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::residual;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p2(x: f64, y: f64) -> Datum {
        Point::new2(x, y).into()
    }

    fn p3(x: f64, y: f64, z: f64) -> Datum {
        Point::new3(x, y, z).into()
    }

    #[test]
    fn line_through_diagonal() {
        let s = [p2(0.0, 0.0), p2(1.0, 1.0)];
        let line = fit_minimal(ModelClass::Line2D, &s).unwrap();
        for d in &s {
            assert!(residual(&line, d) < 1e-12);
        }
        assert_abs_diff_eq!(residual(&line, &p2(1.0, 0.0)), 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn coincident_line_sample_is_degenerate() {
        let err = fit_minimal(ModelClass::Line2D, &[p2(2.0, 3.0), p2(2.0, 3.0)]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSample(_)));
    }

    #[test]
    fn wrong_sample_size() {
        assert!(matches!(
            fit_minimal(ModelClass::Line2D, &[p2(0.0, 0.0)]),
            Err(Error::SampleSize { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn unit_circle_from_three_points() {
        let c = fit_minimal(ModelClass::Circle2D, &[p2(1.0, 0.0), p2(0.0, 1.0), p2(-1.0, 0.0)])
            .unwrap();
        assert_abs_diff_eq!(c.params()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.params()[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.params()[2], 1.0, epsilon = 1e-12);
        assert!(fit_minimal(ModelClass::Circle2D, &[p2(0.0, 0.0), p2(1.0, 1.0), p2(3.0, 3.0)])
            .is_err());
    }

    #[test]
    fn plane_from_axis_points() {
        let p = fit_minimal(ModelClass::Plane3D, &[p3(0.0, 0.0, 0.0), p3(1.0, 0.0, 0.0), p3(0.0, 1.0, 0.0)])
            .unwrap();
        assert_abs_diff_eq!(p.params()[2].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.params()[3], 0.0, epsilon = 1e-12);
        assert!(fit_minimal(ModelClass::Plane3D, &[p3(0.0, 0.0, 0.0), p3(1.0, 1.0, 1.0), p3(2.0, 2.0, 2.0)])
            .is_err());
    }

    #[test]
    fn identity_homography() {
        let s: Vec<Datum> = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]
            .iter()
            .map(|&p| Correspondence::new(p, p).into())
            .collect();
        let h = fit_minimal(ModelClass::Homography, &s).unwrap();
        let p = h.params();
        let s0 = p[0];
        let expected = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        for (a, e) in p.iter().zip(expected) {
            assert_abs_diff_eq!(a / s0, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn collinear_homography_sample_is_degenerate() {
        let s: Vec<Datum> = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.0, 10.0]]
            .iter()
            .map(|&p| Correspondence::new(p, [p[0] * 2.0, p[1] + 1.0]).into())
            .collect();
        assert!(fit_minimal(ModelClass::Homography, &s).is_err());
    }

    fn cylinder_point(axis_pt: Vector3<f64>, axis: Vector3<f64>, r: f64, angle: f64, h: f64) -> Datum {
        let (u, v) = orthonormal_basis(&axis);
        let radial = u * angle.cos() + v * angle.sin();
        let p = axis_pt + axis * h + radial * r;
        Point::new3(p.x, p.y, p.z).with_normal([radial.x, radial.y, radial.z]).into()
    }

    #[test]
    fn cylinder_from_two_oriented_points() {
        let axis = Vector3::new(0.3, -0.2, 1.0).normalize();
        let a = Vector3::new(1.0, 2.0, 3.0);
        let s = [cylinder_point(a, axis, 2.5, 0.2, 1.0), cylinder_point(a, axis, 2.5, 1.9, -4.0)];
        let cyl = fit_minimal(ModelClass::Cylinder3D, &s).unwrap();
        assert_abs_diff_eq!(cyl.params()[6], 2.5, epsilon = 1e-9);
        for d in &s {
            assert!(residual(&cyl, d) < 1e-9);
        }
        let other = cylinder_point(a, axis, 2.5, 4.0, 7.0);
        assert!(residual(&cyl, &other) < 1e-9);
        let refit_cyl = refit(
            ModelClass::Cylinder3D,
            &(0..12).map(|i| cylinder_point(a, axis, 2.5, i as f64 * 0.5, i as f64 - 6.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_abs_diff_eq!(refit_cyl.params()[6], 2.5, epsilon = 1e-9);
    }

    #[test]
    fn parallel_normals_are_degenerate() {
        let a = Point::new3(0.0, 0.0, 0.0).with_normal([1.0, 0.0, 0.0]);
        let b = Point::new3(0.0, 1.0, 0.0).with_normal([1.0, 0.0, 0.0]);
        assert!(fit_minimal(ModelClass::Cylinder3D, &[a.into(), b.into()]).is_err());
        let c = Point::new3(0.0, 1.0, 0.0);
        assert!(fit_minimal(ModelClass::Cylinder3D, &[a.into(), c.into()]).is_err());
    }

    #[test]
    fn line_refit_on_exact_points() {
        let pts: Vec<Datum> = (0..100).map(|i| {
            let x = i as f64 * 0.37 - 10.0;
            p2(x, 2.0 * x + 1.0)
        }).collect();
        let line = refit(ModelClass::Line2D, &pts).unwrap();
        for d in &pts {
            assert!(residual(&line, d) < 1e-9);
        }
    }

    #[test]
    fn line_refit_matches_closed_form_tls() {
        let mut pts: Vec<[f64; 2]> = (0..30).map(|i| [i as f64, 0.5 * i as f64 - 3.0]).collect();
        pts[7][1] += 2.0;
        // closed-form TLS: the direction angle is half the angle of the covariance's off-diagonal
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n);
        let sxx: f64 = pts.iter().map(|p| (p[0] - mx).powi(2)).sum();
        let syy: f64 = pts.iter().map(|p| (p[1] - my).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p[0] - mx) * (p[1] - my)).sum();
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let normal = [-theta.sin(), theta.cos()];
        let oracle = Instance::new(
            ModelClass::Line2D,
            vec![normal[1].atan2(normal[0]), -(normal[0] * mx + normal[1] * my)],
        )
        .unwrap();
        let data: Vec<Datum> = pts.iter().map(|p| p2(p[0], p[1])).collect();
        let line = refit(ModelClass::Line2D, &data).unwrap();
        assert_abs_diff_eq!(line.params()[0], oracle.params()[0], epsilon = 1e-9);
        assert_abs_diff_eq!(line.params()[1], oracle.params()[1], epsilon = 1e-9);
    }

    #[test]
    fn plane_refit_on_minimal_sample_matches_minimal_fit() {
        let s = [p3(0.5, 0.0, 1.0), p3(1.0, 2.0, 0.0), p3(-1.0, 1.0, 3.0)];
        let a = fit_minimal(ModelClass::Plane3D, &s).unwrap();
        let b = refit(ModelClass::Plane3D, &s).unwrap();
        for (x, y) in a.params().iter().zip(b.params()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn circle_refit_exact_points() {
        let pts: Vec<Datum> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.3;
                p2(4.0 + 7.0 * t.cos(), -2.0 + 7.0 * t.sin())
            })
            .collect();
        let c = refit(ModelClass::Circle2D, &pts).unwrap();
        assert_abs_diff_eq!(c.params()[0], 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.params()[1], -2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.params()[2], 7.0, epsilon = 1e-9);
        let collinear: Vec<Datum> = (0..5).map(|i| p2(i as f64, 0.0)).collect();
        assert!(refit(ModelClass::Circle2D, &collinear).is_err());
    }

    #[test]
    fn homography_refit_exact_points() {
        let h = Matrix3::new(1.1, 0.05, 3.0, -0.02, 0.95, -4.0, 1e-4, -2e-4, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<Datum> = (0..40)
            .map(|_| {
                let s = [rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0)];
                let v = h * Vector3::new(s[0], s[1], 1.0);
                Correspondence::new(s, [v.x / v.z, v.y / v.z]).into()
            })
            .collect();
        let est = refit(ModelClass::Homography, &data).unwrap();
        for d in &data {
            assert!(residual(&est, d) < 1e-6);
        }
    }
}
