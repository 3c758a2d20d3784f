//! Synthetic scenes, scene files and evaluation metrics.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, Datum, Point};
use crate::progx::audit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneFormat {
    Xy,
    Xyz,
    Corr,
}

impl FromStr for SceneFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "xy" => Ok(SceneFormat::Xy),
            "xyz" => Ok(SceneFormat::Xyz),
            "corr" => Ok(SceneFormat::Corr),
            other => Err(Error::ConfigInvalid(format!("unknown scene format '{other}'"))),
        }
    }
}

/// Axis-aligned 2D box `[min_x, min_y, max_x, max_y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        BBox { min: [min_x, min_y], max: [max_x, max_y] }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0]
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        [rng.gen_range(self.min[0]..self.max[0]), rng.gen_range(self.min[1]..self.max[1])]
    }
}

impl Default for BBox {
    fn default() -> Self {
        BBox::new(0.0, 0.0, 1000.0, 1000.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SceneMeta {
    pub generator: Option<String>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    pub outlier_ratio: Option<f64>,
    pub bbox: Option<BBox>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub data: Vec<Datum>,
    /// Cluster per datum; `0` marks outliers.
    pub ground_truth: Option<Vec<usize>>,
    pub meta: SceneMeta,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of non-outlier ground-truth clusters.
    pub fn cluster_count(&self) -> usize {
        self.ground_truth.as_ref().map_or(0, |gt| {
            let mut ids: Vec<usize> = gt.iter().copied().filter(|&g| g != 0).collect();
            ids.sort_unstable();
            ids.dedup();
            ids.len()
        })
    }

    pub fn format(&self) -> SceneFormat {
        match self.data.first() {
            Some(Datum::Correspondence(_)) => SceneFormat::Corr,
            Some(Datum::Point(p)) if p.dim() == 3 => SceneFormat::Xyz,
            _ => SceneFormat::Xy,
        }
    }
}

/// Outliers added to `inliers` points to reach outlier ratio `nu`.
pub fn outlier_count(inliers: usize, nu: f64) -> usize {
    if nu <= 0.0 {
        return 0;
    }
    // the small slack keeps exact ratios such as 0.5 from rounding up
    (nu / (1.0 - nu) * inliers as f64 - 1e-9).ceil().max(0.0) as usize
}

fn check_line_params(n_lines: usize, points_per_line: usize, sigma: f64, nu: f64, bbox: &BBox) -> Result<()> {
    if n_lines == 0 || points_per_line == 0 {
        return Err(Error::ConfigInvalid("need at least one line with one point".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::ConfigInvalid("noise must be nonnegative".into()));
    }
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::ConfigInvalid("outlier ratio must lie in [0, 1)".into()));
    }
    if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
        return Err(Error::ConfigInvalid("bounding box must have positive extent".into()));
    }
    Ok(())
}

/// Points on the segment `a -> b`, displaced along its unit normal by N(0, σ²).
fn noisy_segment<R: Rng + ?Sized>(a: [f64; 2], b: [f64; 2], n: usize, sigma: f64, rng: &mut R) -> Vec<[f64; 2]> {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    let normal = [-dy / len, dx / len];
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid deviation");
    (0..n)
        .map(|_| {
            // open interval: segment endpoints are never sampled
            let t: f64 = rng.gen_range(f64::EPSILON..1.0);
            let e = if sigma > 0.0 { noise.sample(rng) } else { 0.0 };
            [a[0] + t * dx + e * normal[0], a[1] + t * dy + e * normal[1]]
        })
        .collect()
}

fn finish_line_scene<R: Rng + ?Sized>(
    name: &str,
    segments: Vec<([f64; 2], [f64; 2])>,
    points_per_line: usize,
    sigma: f64,
    nu: f64,
    bbox: BBox,
    rng: &mut R,
) -> Scene {
    let mut data = Vec::new();
    let mut gt = Vec::new();
    for (k, (a, b)) in segments.into_iter().enumerate() {
        for p in noisy_segment(a, b, points_per_line, sigma, rng) {
            data.push(Datum::from(Point::new2(p[0], p[1])));
            gt.push(k + 1);
        }
    }
    for _ in 0..outlier_count(data.len(), nu) {
        let p = bbox.sample(rng);
        data.push(Point::new2(p[0], p[1]).into());
        gt.push(0);
    }
    Scene {
        data,
        ground_truth: Some(gt),
        meta: SceneMeta {
            generator: Some(name.into()),
            seed: None,
            noise: Some(sigma),
            outlier_ratio: Some(nu),
            bbox: Some(bbox),
        },
    }
}

/// `n_lines` segments crossing the box center at equal angular spacing.
pub fn gen_star<R: Rng + ?Sized>(
    n_lines: usize,
    points_per_line: usize,
    sigma: f64,
    nu: f64,
    bbox: BBox,
    rng: &mut R,
) -> Result<Scene> {
    check_line_params(n_lines, points_per_line, sigma, nu, &bbox)?;
    let c = bbox.center();
    let half = 0.45 * bbox.width().min(bbox.height());
    let segments = (0..n_lines)
        .map(|k| {
            let theta = std::f64::consts::PI * (k as f64 + 0.5) / n_lines as f64;
            let (s, co) = theta.sin_cos();
            ([c[0] - half * co, c[1] - half * s], [c[0] + half * co, c[1] + half * s])
        })
        .collect();
    Ok(finish_line_scene("star", segments, points_per_line, sigma, nu, bbox, rng))
}

/// Alternating horizontal and vertical segments climbing diagonally
/// through the box; consecutive segments meet only at their endpoints.
pub fn gen_stair<R: Rng + ?Sized>(
    n_lines: usize,
    points_per_line: usize,
    sigma: f64,
    nu: f64,
    bbox: BBox,
    rng: &mut R,
) -> Result<Scene> {
    check_line_params(n_lines, points_per_line, sigma, nu, &bbox)?;
    let steps_x = n_lines.div_ceil(2) as f64;
    let steps_y = (n_lines / 2).max(1) as f64;
    let (sx, sy) = (0.8 * bbox.width() / steps_x, 0.8 * bbox.height() / steps_y);
    let mut at = [bbox.min[0] + 0.1 * bbox.width(), bbox.min[1] + 0.1 * bbox.height()];
    let mut segments = Vec::with_capacity(n_lines);
    for k in 0..n_lines {
        let next = if k % 2 == 0 { [at[0] + sx, at[1]] } else { [at[0], at[1] + sy] };
        segments.push((at, next));
        at = next;
    }
    Ok(finish_line_scene("stair", segments, points_per_line, sigma, nu, bbox, rng))
}

/// Planar scene seen by two cameras; every plane induces one homography.
#[derive(Clone, Debug, PartialEq)]
pub struct HomographyScene {
    pub scene: Scene,
    /// Image-1 to image-2 homography of each plane.
    pub homographies: Vec<Matrix3<f64>>,
}

/// `n_planes` planes in front of two pinhole cameras (640x480 images).
/// Plane `k` is imaged in the `k`-th vertical band of the first image;
/// correspondences get N(0, σ²) pixel noise in both images, and outliers
/// are random pixel pairs.
pub fn gen_homographies<R: Rng + ?Sized>(
    n_planes: usize,
    points_per_plane: usize,
    sigma: f64,
    nu: f64,
    rng: &mut R,
) -> Result<HomographyScene> {
    if n_planes == 0 || points_per_plane < 4 {
        return Err(Error::ConfigInvalid("need at least one plane with four points".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || !(0.0..1.0).contains(&nu) {
        return Err(Error::ConfigInvalid("invalid noise or outlier ratio".into()));
    }
    let (w, h) = (640.0, 480.0);
    let k = Matrix3::new(500.0, 0.0, w / 2.0, 0.0, 500.0, h / 2.0, 0.0, 0.0, 1.0);
    let k_inv = k.try_inverse().expect("calibration is invertible");
    let r = Rotation3::from_euler_angles(0.02, -0.15, 0.03).into_inner();
    let t = Vector3::new(0.8, 0.05, 0.1);
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid deviation");
    let jitter = |rng: &mut R| if sigma > 0.0 { noise.sample(rng) } else { 0.0 };

    let mut data = Vec::new();
    let mut gt = Vec::new();
    let mut homographies = Vec::new();
    for p in 0..n_planes {
        // plane n . X = d in camera-1 coordinates
        let tilt = 0.6 * (p as f64 / (n_planes.max(2) - 1) as f64 - 0.5);
        let n = Vector3::new(tilt.sin(), 0.1 * (p as f64 - 1.0), tilt.cos()).normalize();
        let d = 4.0 + p as f64;
        let hm = k * (r - t * n.transpose() / d) * k_inv;
        let hm = hm / hm.norm();
        let band = (w / n_planes as f64, p as f64 * w / n_planes as f64);
        let mut added = 0;
        while added < points_per_plane {
            let x1 = [band.1 + rng.gen_range(0.05..0.95) * band.0, rng.gen_range(0.05 * h..0.95 * h)];
            let y = hm * Vector3::new(x1[0], x1[1], 1.0);
            if y.z.abs() < 1e-12 {
                continue;
            }
            let x2 = [y.x / y.z, y.y / y.z];
            if !(0.0..w).contains(&x2[0]) || !(0.0..h).contains(&x2[1]) {
                continue;
            }
            let src = [x1[0] + jitter(rng), x1[1] + jitter(rng)];
            let dst = [x2[0] + jitter(rng), x2[1] + jitter(rng)];
            data.push(Datum::from(Correspondence::new(src, dst)));
            gt.push(p + 1);
            added += 1;
        }
        homographies.push(hm);
    }
    for _ in 0..outlier_count(data.len(), nu) {
        let src = [rng.gen_range(0.0..w), rng.gen_range(0.0..h)];
        let dst = [rng.gen_range(0.0..w), rng.gen_range(0.0..h)];
        data.push(Correspondence::new(src, dst).into());
        gt.push(0);
    }
    let meta = SceneMeta {
        generator: Some("homography".into()),
        seed: None,
        noise: Some(sigma),
        outlier_ratio: Some(nu),
        bbox: Some(BBox::new(0.0, 0.0, w, h)),
    };
    Ok(HomographyScene { scene: Scene { data, ground_truth: Some(gt), meta }, homographies })
}

fn parse_meta(meta: &mut SceneMeta, comment: &str, line: usize) -> Result<()> {
    let Some((key, value)) = comment.split_once(':') else { return Ok(()) };
    let value = value.trim();
    let bad = |what: &str| Error::Parse { line, message: format!("bad {what} '{value}'") };
    match key.trim() {
        "generator" => meta.generator = Some(value.to_string()),
        "seed" => meta.seed = Some(value.parse().map_err(|_| bad("seed"))?),
        "noise" => meta.noise = Some(value.parse().map_err(|_| bad("noise"))?),
        "outlier_ratio" => meta.outlier_ratio = Some(value.parse().map_err(|_| bad("outlier ratio"))?),
        "bbox" => {
            let v: Vec<f64> = value.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("bbox"))?;
            if v.len() != 4 {
                return Err(bad("bbox"));
            }
            meta.bbox = Some(BBox::new(v[0], v[1], v[2], v[3]));
        }
        _ => {}
    }
    Ok(())
}

fn parse_gt(token: &str, line: usize) -> Result<usize> {
    token.parse().map_err(|_| Error::Parse { line, message: format!("ground-truth id '{token}' is not a nonnegative integer") })
}

/// Parses whitespace-separated rows: `x y [gt]`, `x y z [nx ny nz] [gt]` or
/// `x1 y1 x2 y2 [gt]`. Lines starting with `#` carry `key: value` metadata.
pub fn parse_scene(text: &str, format: SceneFormat) -> Result<Scene> {
    let mut meta = SceneMeta::default();
    let mut data = Vec::new();
    let mut gt: Vec<usize> = Vec::new();
    let mut with_gt: Option<bool> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        if let Some(comment) = row.strip_prefix('#') {
            parse_meta(&mut meta, comment, line)?;
            continue;
        }
        let tokens: Vec<&str> = row.split_whitespace().collect();
        let allowed: &[usize] = match format {
            SceneFormat::Xy => &[2, 3],
            SceneFormat::Xyz => &[3, 4, 6, 7],
            SceneFormat::Corr => &[4, 5],
        };
        if !allowed.contains(&tokens.len()) {
            return Err(Error::DimensionMismatch { line, expected: allowed[0], found: tokens.len() });
        }
        let has_gt = matches!((format, tokens.len()), (SceneFormat::Xy, 3) | (SceneFormat::Xyz, 4 | 7) | (SceneFormat::Corr, 5));
        match with_gt {
            None => with_gt = Some(has_gt),
            Some(prev) if prev != has_gt => {
                return Err(Error::Parse { line, message: "ground-truth column present on some rows only".into() })
            }
            _ => {}
        }
        let n_num = tokens.len() - has_gt as usize;
        let mut v = [0.0f64; 6];
        for (k, tok) in tokens[..n_num].iter().enumerate() {
            v[k] = tok.parse().map_err(|_| Error::Parse { line, message: format!("'{tok}' is not a number") })?;
            if !v[k].is_finite() {
                return Err(Error::Parse { line, message: format!("'{tok}' is not finite") });
            }
        }
        let datum = match (format, n_num) {
            (SceneFormat::Xy, _) => Point::new2(v[0], v[1]).into(),
            (SceneFormat::Xyz, 3) => Point::new3(v[0], v[1], v[2]).into(),
            (SceneFormat::Xyz, _) => {
                let n = Vector3::new(v[3], v[4], v[5]);
                let len = n.norm();
                if !(len > 0.0) {
                    return Err(Error::Parse { line, message: "zero normal".into() });
                }
                Point::new3(v[0], v[1], v[2]).with_normal([n.x / len, n.y / len, n.z / len]).into()
            }
            (SceneFormat::Corr, _) => Correspondence::new([v[0], v[1]], [v[2], v[3]]).into(),
        };
        data.push(datum);
        if has_gt {
            gt.push(parse_gt(tokens[n_num], line)?);
        }
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ground_truth = with_gt.unwrap_or(false).then_some(gt);
    Ok(Scene { data, ground_truth, meta })
}

pub fn load_scene(path: &Path, format: SceneFormat) -> Result<Scene> {
    parse_scene(&std::fs::read_to_string(path)?, format)
}

/// Serializes a scene; numbers use the shortest representation that parses
/// back to the same value.
pub fn format_scene(scene: &Scene) -> String {
    let mut out = String::new();
    let m = &scene.meta;
    if let Some(g) = &m.generator {
        let _ = writeln!(out, "# generator: {g}");
    }
    if let Some(s) = m.seed {
        let _ = writeln!(out, "# seed: {s}");
    }
    if let Some(s) = m.noise {
        let _ = writeln!(out, "# noise: {s:?}");
    }
    if let Some(s) = m.outlier_ratio {
        let _ = writeln!(out, "# outlier_ratio: {s:?}");
    }
    if let Some(b) = m.bbox {
        let _ = writeln!(out, "# bbox: {:?} {:?} {:?} {:?}", b.min[0], b.min[1], b.max[0], b.max[1]);
    }
    for (i, d) in scene.data.iter().enumerate() {
        let mut cols: Vec<String> = d.position().iter().map(|x| format!("{x:?}")).collect();
        if let Some(n) = d.as_point().and_then(|p| p.normal()) {
            cols.extend(n.iter().map(|x| format!("{x:?}")));
        }
        if let Some(gt) = &scene.ground_truth {
            cols.push(gt[i].to_string());
        }
        out.push_str(&cols.join(" "));
        out.push('\n');
    }
    out
}

pub fn save_scene(path: &Path, scene: &Scene) -> Result<()> {
    std::fs::write(path, format_scene(scene))?;
    Ok(())
}

fn compact(ids: &[usize]) -> (Vec<usize>, usize) {
    let mut sorted: Vec<usize> = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mapped = ids.iter().map(|id| sorted.binary_search(id).expect("id present")).collect();
    (mapped, sorted.len())
}

/// Fraction of points in the wrong cluster under the best one-to-one
/// matching of predicted clusters to ground-truth clusters (outliers
/// included as an ordinary cluster on both sides).
pub fn misclassification_error(predicted: &[usize], gt: &[usize]) -> Result<f64> {
    if predicted.len() != gt.len() {
        return Err(Error::ConfigInvalid(format!("{} labels for {} ground-truth points", predicted.len(), gt.len())));
    }
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (p, np) = compact(predicted);
    let (g, ng) = compact(gt);
    let size = np.max(ng);
    let mut counts = Matrix::new(size, size, 0i64);
    for (&a, &b) in p.iter().zip(&g) {
        counts[(a, b)] += 1;
    }
    let (agreement, _) = kuhn_munkres(&counts);
    Ok(1.0 - agreement as f64 / gt.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub misclassification_error: f64,
    pub false_negatives: usize,
    pub false_positives: usize,
    /// Returned instance count minus ground-truth cluster count.
    pub instance_delta: i64,
    pub runtime_ms: f64,
}

/// Scores labels for `n_instances` instances against ground truth.
pub fn evaluate(labels: &[usize], n_instances: usize, gt: &[usize], runtime_ms: f64) -> Result<EvalReport> {
    let me = misclassification_error(labels, gt)?;
    let a = audit(labels, n_instances, gt);
    let clusters = a.matched + a.false_negatives;
    Ok(EvalReport {
        misclassification_error: me,
        false_negatives: a.false_negatives,
        false_positives: a.false_positives,
        instance_delta: n_instances as i64 - clusters as i64,
        runtime_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fit_minimal, residual, ModelClass};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn outlier_counts() {
        assert_eq!(outlier_count(1250, 0.5), 1250);
        assert_eq!(outlier_count(100, 0.0), 0);
        assert_eq!(outlier_count(10, 0.8), 40);
        assert_eq!(outlier_count(3, 0.3), 2);
    }

    #[test]
    fn noise_free_star_points_lie_on_their_lines() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = gen_star(5, 50, 0.0, 0.5, BBox::default(), &mut rng).unwrap();
        let gt = s.ground_truth.as_ref().unwrap();
        assert_eq!(gt.iter().filter(|&&g| g == 0).count(), 250);
        assert_eq!(s.cluster_count(), 5);
        for k in 1..=5 {
            let pts: Vec<Datum> = (0..s.len()).filter(|&i| gt[i] == k).map(|i| s.data[i]).collect();
            let line = fit_minimal(ModelClass::Line2D, &pts[..2]).unwrap();
            assert!(pts.iter().all(|d| residual(&line, d) < 1e-9));
        }
    }

    #[test]
    fn stair_clusters_and_no_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = gen_stair(4, 30, 1.0, 0.0, BBox::default(), &mut rng).unwrap();
        assert_eq!(s.cluster_count(), 4);
        assert!(s.ground_truth.unwrap().iter().all(|&g| g != 0));
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_star(11, 20, 1.0, 0.5, BBox::default(), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = gen_star(11, 20, 1.0, 0.5, BBox::default(), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cluster_count(), 11);
    }

    #[test]
    fn scenes_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = gen_star(3, 10, 1.0, 0.3, BBox::default(), &mut rng).unwrap();
        s.meta.seed = Some(8);
        assert_eq!(parse_scene(&format_scene(&s), SceneFormat::Xy).unwrap(), s);
        let h = gen_homographies(2, 10, 0.5, 0.2, &mut rng).unwrap().scene;
        assert_eq!(parse_scene(&format_scene(&h), SceneFormat::Corr).unwrap(), h);
        let p = Scene {
            data: vec![Point::new3(1.0, 2.0, 3.0).with_normal([0.0, 0.0, 1.0]).into()],
            ground_truth: None,
            meta: SceneMeta::default(),
        };
        assert_eq!(parse_scene(&format_scene(&p), SceneFormat::Xyz).unwrap(), p);
    }

    #[test]
    fn parse_examples_and_errors() {
        let s = parse_scene("0 0\n1 1", SceneFormat::Xy).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.ground_truth.is_none());
        let s = parse_scene("# noise: 1.0\n0 0 1\n1 1 0\n", SceneFormat::Xy).unwrap();
        assert_eq!(s.ground_truth, Some(vec![1, 0]));
        assert_eq!(s.meta.noise, Some(1.0));
        assert!(matches!(parse_scene("0 0\n1 x\n", SceneFormat::Xy), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_scene("0 0\n1 2 3 4 5\n", SceneFormat::Xy), Err(Error::DimensionMismatch { line: 2, .. })));
        assert!(matches!(parse_scene("0 0 1.5\n", SceneFormat::Xy), Err(Error::Parse { line: 1, .. })));
        assert_eq!(parse_scene("# only a comment\n", SceneFormat::Xy), Err(Error::EmptyInput));
    }

    #[test]
    fn misclassification_examples() {
        let gt = [0, 1, 1, 2, 2, 2, 3, 3, 0, 1];
        assert_eq!(misclassification_error(&gt, &gt).unwrap(), 0.0);
        let permuted: Vec<usize> = gt.iter().map(|&g| [7, 3, 0, 1][g]).collect();
        assert_eq!(misclassification_error(&permuted, &gt).unwrap(), 0.0);
        let mut moved = gt;
        moved[3] = 3;
        assert!((misclassification_error(&moved, &gt).unwrap() - 0.1).abs() < 1e-12);
        // more predicted clusters than ground truth
        assert!((misclassification_error(&[1, 2, 3, 4], &[1, 1, 2, 2]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn homography_scene_matches_its_homographies() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let hs = gen_homographies(3, 40, 0.0, 0.3, &mut rng).unwrap();
        let gt = hs.scene.ground_truth.as_ref().unwrap();
        for (d, &g) in hs.scene.data.iter().zip(gt) {
            if g == 0 {
                continue;
            }
            let c = d.as_correspondence().unwrap();
            let y = hs.homographies[g - 1] * Vector3::new(c.source()[0], c.source()[1], 1.0);
            assert!((y.x / y.z - c.target()[0]).abs() < 1e-6);
            assert!((y.y / y.z - c.target()[1]).abs() < 1e-6);
        }
        assert_eq!(gt.iter().filter(|&&g| g == 0).count(), outlier_count(120, 0.3));
    }
}
