//! The compound model (union of the active instances' distance fields) and
//! the RANSAC / MSAC quality functions, plain and compound-conditioned.

use crate::geometry::{residual, Datum, Instance};

/// MSAC truncation radius for inlier threshold `eps`.
#[inline]
pub fn msac_gamma(eps: f64) -> f64 {
    1.5 * eps
}

/// Per-point distance to the nearest active instance, kept in sync with the
/// active set.
#[derive(Clone, Debug)]
pub struct CompoundModel {
    active: Vec<Instance>,
    // factor mapping an instance's residual into the compound's threshold units
    scales: Vec<f64>,
    min_dist: Vec<f64>,
    threshold: f64,
}

impl CompoundModel {
    pub fn new(n_points: usize, threshold: f64) -> Self {
        CompoundModel { active: Vec::new(), scales: Vec::new(), min_dist: vec![f64::INFINITY; n_points], threshold }
    }

    pub fn from_instances(data: &[Datum], threshold: f64, instances: impl IntoIterator<Item = Instance>) -> Self {
        let mut cm = CompoundModel::new(data.len(), threshold);
        for h in instances {
            cm.add(h, data);
        }
        cm
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn instances(&self) -> &[Instance] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.min_dist.len()
    }

    pub fn add(&mut self, instance: Instance, data: &[Datum]) {
        self.add_scaled(instance, 1.0, data);
    }

    /// Adds an instance whose own inlier threshold differs from the compound's;
    /// its residuals are rescaled so that its threshold maps onto the compound's.
    pub fn add_with_threshold(&mut self, instance: Instance, instance_threshold: f64, data: &[Datum]) {
        let scale = if instance_threshold == self.threshold { 1.0 } else { self.threshold / instance_threshold };
        self.add_scaled(instance, scale, data);
    }

    fn add_scaled(&mut self, instance: Instance, scale: f64, data: &[Datum]) {
        debug_assert_eq!(data.len(), self.min_dist.len());
        for (d, datum) in self.min_dist.iter_mut().zip(data) {
            let r = residual(&instance, datum) * scale;
            if r < *d {
                *d = r;
            }
        }
        self.active.push(instance);
        self.scales.push(scale);
    }

    /// Removes the instance at `index` and recomputes the field from the rest.
    pub fn remove(&mut self, index: usize, data: &[Datum]) -> Instance {
        let removed = self.active.remove(index);
        self.scales.remove(index);
        self.min_dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        for (h, &s) in self.active.iter().zip(&self.scales) {
            for (d, datum) in self.min_dist.iter_mut().zip(data) {
                let r = residual(h, datum) * s;
                if r < *d {
                    *d = r;
                }
            }
        }
        removed
    }

    #[inline]
    pub fn distance(&self, point: usize) -> f64 {
        self.min_dist[point]
    }

    pub fn distances(&self) -> &[f64] {
        &self.min_dist
    }

    #[inline]
    pub fn is_inlier(&self, point: usize) -> bool {
        self.min_dist[point] < self.threshold
    }

    /// Number of points closer than the threshold to some active instance.
    pub fn inlier_count(&self) -> usize {
        self.min_dist.iter().filter(|&&d| d < self.threshold).count()
    }

    /// Compound distance of `point` expressed in units where `eps` is the threshold.
    #[inline]
    pub(crate) fn distance_in(&self, point: usize, eps: f64) -> f64 {
        let d = self.min_dist[point];
        if eps == self.threshold {
            d
        } else {
            d * (eps / self.threshold)
        }
    }
}

pub fn quality_ransac(instance: &Instance, data: &[Datum], eps: f64) -> usize {
    data.iter().filter(|d| residual(instance, d) < eps).count()
}

/// Inliers of `instance` that are not inliers of the compound model.
pub fn quality_ransac_conditioned(instance: &Instance, cm: &CompoundModel, data: &[Datum], eps: f64) -> usize {
    data.iter()
        .enumerate()
        .filter(|(i, d)| residual(instance, d) < eps && cm.distance_in(*i, eps) >= eps)
        .count()
}

pub fn quality_msac(instance: &Instance, data: &[Datum], eps: f64) -> f64 {
    let g2 = msac_gamma(eps).powi(2);
    let loss: f64 = data.iter().map(|d| (residual(instance, d).powi(2) / g2).min(1.0)).sum();
    data.len() as f64 - loss
}

/// Per-point loss of the conditioned MSAC score; zero only for points close to
/// the proposal and far from the compound model.
#[inline]
pub fn conditioned_loss(instance_dist: f64, compound_dist: f64, gamma_sq: f64) -> f64 {
    let own = instance_dist * instance_dist / gamma_sq;
    let shared = 1.0 - compound_dist * compound_dist / gamma_sq;
    own.max(shared).min(1.0)
}

pub fn quality_msac_conditioned(instance: &Instance, cm: &CompoundModel, data: &[Datum], eps: f64) -> f64 {
    let g2 = msac_gamma(eps).powi(2);
    let loss: f64 = data
        .iter()
        .enumerate()
        .map(|(i, d)| conditioned_loss(residual(instance, d), cm.distance_in(i, eps), g2))
        .sum();
    data.len() as f64 - loss
}

/// Conditioned MSAC score with early exit: returns `None` as soon as the score
/// provably cannot exceed `floor`.
pub(crate) fn quality_msac_conditioned_above(
    instance: &Instance,
    cm: &CompoundModel,
    data: &[Datum],
    eps: f64,
    floor: f64,
) -> Option<f64> {
    let g2 = msac_gamma(eps).powi(2);
    let n = data.len() as f64;
    let budget = n - floor;
    let mut loss = 0.0;
    for (i, d) in data.iter().enumerate() {
        let c = cm.distance_in(i, eps);
        // points on the compound model contribute a full unit of loss regardless
        let l = if c == 0.0 { 1.0 } else { conditioned_loss(residual(instance, d), c, g2) };
        loss += l;
        if loss >= budget {
            return None;
        }
    }
    Some(n - loss)
}

/// Uniform bucket grid over planar points, used to visit only the points in
/// a line's neighborhood strip.
#[derive(Clone, Debug)]
pub(crate) struct PointGrid {
    ox: f64,
    oy: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<u32>,
    items: Vec<u32>,
}

impl PointGrid {
    const MAX_CELLS: f64 = 4_000_000.0;

    /// `None` unless every datum is a finite planar point.
    pub(crate) fn build(data: &[Datum], cell_hint: f64) -> Option<Self> {
        let mut xy = Vec::with_capacity(data.len());
        for d in data {
            let p = d.as_point()?;
            if p.dim() != 2 || !d.is_finite() {
                return None;
            }
            xy.push((p.x(), p.y()));
        }
        if xy.is_empty() {
            return None;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &xy {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let (w, h) = (x1 - x0, y1 - y0);
        let mut cell = cell_hint.max(w.max(h) / 1024.0).max(f64::MIN_POSITIVE);
        while ((w / cell).floor() + 1.0) * ((h / cell).floor() + 1.0) > Self::MAX_CELLS {
            cell *= 2.0;
        }
        let nx = (w / cell) as usize + 1;
        let ny = (h / cell) as usize + 1;
        let index = |x: f64, y: f64| {
            let i = (((x - x0) / cell) as usize).min(nx - 1);
            let j = (((y - y0) / cell) as usize).min(ny - 1);
            j * nx + i
        };
        let mut start = vec![0u32; nx * ny + 1];
        for &(x, y) in &xy {
            start[index(x, y) + 1] += 1;
        }
        for k in 1..start.len() {
            start[k] += start[k - 1];
        }
        let mut fill = start.clone();
        let mut items = vec![0u32; xy.len()];
        for (p, &(x, y)) in xy.iter().enumerate() {
            let c = index(x, y);
            items[fill[c] as usize] = p as u32;
            fill[c] += 1;
        }
        Some(PointGrid { ox: x0, oy: y0, cell, nx, ny, start, items })
    }

    fn cell_range(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let a = ((lo - origin) / self.cell).floor();
        let b = ((hi - origin) / self.cell).floor();
        if b < 0.0 || a > (n - 1) as f64 {
            return None;
        }
        Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
    }

    /// Calls `f` for (at least) every point within `radius` of the line
    /// `co * x + s * y + c = 0`.
    pub(crate) fn for_each_near_line(&self, co: f64, s: f64, c: f64, radius: f64, mut f: impl FnMut(usize)) {
        // walk along the axis the line is closer to; cells are padded by a
        // hair so that rounding never drops a boundary point
        let pad = 1e-9 * self.cell;
        let horizontal = s.abs() >= co.abs();
        let (n_major, n_minor, o_major, o_minor, a, b) =
            if horizontal { (self.nx, self.ny, self.ox, self.oy, co, s) } else { (self.ny, self.nx, self.oy, self.ox, s, co) };
        let half = radius / b.abs() + pad;
        let along = |u: f64| -(a * u + c) / b;
        for i in 0..n_major {
            let u0 = o_major + i as f64 * self.cell - pad;
            let u1 = u0 + self.cell + 2.0 * pad;
            let (v0, v1) = (along(u0), along(u1));
            let Some((j0, j1)) = self.cell_range(v0.min(v1) - half, v0.max(v1) + half, o_minor, n_minor) else { continue };
            for j in j0..=j1 {
                let cell = if horizontal { j * self.nx + i } else { i * self.nx + j };
                for &p in &self.items[self.start[cell] as usize..self.start[cell + 1] as usize] {
                    f(p as usize);
                }
            }
        }
    }
}

/// Conditioned MSAC score of a line evaluated on its strip only: points
/// farther than γ lose a full unit under the conditioned loss, so they do not
/// change the score.
pub(crate) fn quality_msac_conditioned_line(
    instance: &Instance,
    cm: &CompoundModel,
    data: &[Datum],
    grid: &PointGrid,
    eps: f64,
) -> f64 {
    let (co, s, c) = instance.line_equation().expect("line instance");
    let g = msac_gamma(eps);
    let g2 = g * g;
    let mut gain = 0.0;
    grid.for_each_near_line(co, s, c, g, |p| {
        let r = residual(instance, &data[p]);
        if r < g {
            gain += 1.0 - conditioned_loss(r, cm.distance_in(p, eps), g2);
        }
    });
    gain
}

/// Indices of points with residual below `t` that are not compound inliers at `eps`.
pub fn conditioned_support(instance: &Instance, cm: &CompoundModel, data: &[Datum], t: f64, eps: f64) -> Vec<usize> {
    data.iter()
        .enumerate()
        .filter(|(i, d)| cm.distance_in(*i, eps) >= eps && residual(instance, d) < t)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ModelClass, Point};
    use std::f64::consts::PI;

    fn p(x: f64, y: f64) -> Datum {
        Point::new2(x, y).into()
    }

    fn x_axis() -> Instance {
        Instance::new(ModelClass::Line2D, vec![PI / 2.0, 0.0]).unwrap()
    }

    fn y_axis() -> Instance {
        Instance::new(ModelClass::Line2D, vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn compound_distance_tracks_active_set() {
        let data = vec![p(2.0, 5.0)];
        let mut cm = CompoundModel::new(1, 1.0);
        assert!(cm.distance(0).is_infinite());
        cm.add(x_axis(), &data);
        cm.add(y_axis(), &data);
        assert_eq!(cm.distance(0), 2.0);
        cm.remove(1, &data);
        assert_eq!(cm.distance(0), 5.0);
    }

    #[test]
    fn ransac_counts() {
        let data = vec![p(0.0, 0.0), p(0.0, 3.0), p(10.0, 0.5)];
        assert_eq!(quality_ransac(&x_axis(), &data, 1.0), 2);
        assert_eq!(quality_ransac(&x_axis(), &data, 5.0), 3);
        assert_eq!(quality_ransac(&x_axis(), &[], 1.0), 0);
    }

    #[test]
    fn ransac_conditioned_counts() {
        let data: Vec<Datum> = (0..10).map(|i| p(i as f64 - 4.5, 0.0)).collect();
        let cm = CompoundModel::new(10, 1.0);
        assert_eq!(quality_ransac_conditioned(&x_axis(), &cm, &data, 1.0), 10);

        let mut same = CompoundModel::new(10, 1.0);
        same.add(x_axis(), &data);
        assert_eq!(quality_ransac_conditioned(&x_axis(), &same, &data, 1.0), 0);

        // vertical lines at x = -1 and x = 1 cover the points at -1.5, -0.5, 0.5, 1.5
        let mut partial = CompoundModel::new(10, 1.0);
        for x in [-1.0, 1.0] {
            partial.add(Instance::new(ModelClass::Line2D, vec![0.0, -x]).unwrap(), &data);
        }
        let covered = (0..10).filter(|&i| partial.is_inlier(i)).count();
        assert_eq!(covered, 4);
        assert_eq!(quality_ransac_conditioned(&x_axis(), &partial, &data, 1.0), 6);
    }

    #[test]
    fn msac_plug_in_values() {
        let eps = 2.0;
        let g = msac_gamma(eps);
        let line = x_axis();
        assert_eq!(quality_msac(&line, &[p(0.0, 0.0)], eps), 1.0);
        assert!((quality_msac(&line, &[p(0.0, g / 2.0)], eps) - 0.75).abs() < 1e-12);
        assert_eq!(quality_msac(&line, &[p(0.0, g)], eps), 0.0);
        assert_eq!(quality_msac(&line, &[p(0.0, 3.0 * g)], eps), 0.0);
    }

    #[test]
    fn msac_conditioned_plug_in_values() {
        let eps = 2.0;
        let g = msac_gamma(eps);
        let g2 = g * g;
        assert_eq!(conditioned_loss(0.0, g, g2), 0.0);
        assert_eq!(conditioned_loss(0.0, f64::INFINITY, g2), 0.0);
        assert_eq!(conditioned_loss(0.0, 0.0, g2), 1.0);
        assert!((conditioned_loss(g / 2.0, g / 2.0, g2) - 0.75).abs() < 1e-12);

        let data = vec![p(0.0, 0.0)];
        let mut cm = CompoundModel::new(1, eps);
        cm.add(y_axis(), &data);
        assert_eq!(quality_msac_conditioned(&x_axis(), &cm, &data, eps), 0.0);
    }

    #[test]
    fn empty_compound_reduces_to_msac() {
        let data: Vec<Datum> = (0..50).map(|i| p(i as f64, (i % 7) as f64 * 0.4)).collect();
        let cm = CompoundModel::new(data.len(), 1.0);
        let h = x_axis();
        assert_eq!(quality_msac_conditioned(&h, &cm, &data, 1.0), quality_msac(&h, &data, 1.0));
    }

    #[test]
    fn early_exit_agrees_with_full_score() {
        let data: Vec<Datum> = (0..50).map(|i| p(i as f64, (i % 7) as f64 * 0.4)).collect();
        let mut cm = CompoundModel::new(data.len(), 1.0);
        cm.add(Instance::new(ModelClass::Line2D, vec![PI / 2.0, -2.0]).unwrap(), &data);
        let h = x_axis();
        let full = quality_msac_conditioned(&h, &cm, &data, 1.0);
        assert_eq!(quality_msac_conditioned_above(&h, &cm, &data, 1.0, full - 1.0).unwrap(), full);
        assert!(quality_msac_conditioned_above(&h, &cm, &data, 1.0, full + 1e-9).is_none());
    }

    #[test]
    fn mixed_thresholds_rescale_compound_distance() {
        let data = vec![p(0.0, 3.0)];
        let mut cm = CompoundModel::new(1, 1.0);
        cm.add_with_threshold(x_axis(), 2.0, &data);
        assert_eq!(cm.distance(0), 1.5);
        assert_eq!(cm.distance_in(0, 2.0), 3.0);
    }

    #[test]
    fn strip_score_matches_full_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let data: Vec<Datum> = (0..2000).map(|_| p(rng.gen_range(-50.0..250.0), rng.gen_range(0.0..90.0))).collect();
        let mut cm = CompoundModel::new(data.len(), 2.0);
        cm.add(Instance::new(ModelClass::Line2D, vec![0.3, -40.0]).unwrap(), &data);
        let grid = PointGrid::build(&data, 6.0).unwrap();
        for k in 0..200 {
            let alpha = k as f64 * 0.0317;
            let h = Instance::new(ModelClass::Line2D, vec![alpha, -rng.gen_range(-100.0..200.0)]).unwrap();
            let full = quality_msac_conditioned(&h, &cm, &data, 2.0);
            let strip = quality_msac_conditioned_line(&h, &cm, &data, &grid, 2.0);
            assert!((full - strip).abs() < 1e-9 * data.len() as f64, "{alpha}: {full} vs {strip}");
        }
    }
}
