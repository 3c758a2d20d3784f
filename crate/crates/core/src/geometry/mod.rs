//! Model classes, data points and the per-class residual functions.
//!
//! Every class exposes a minimal solver ([`fit_minimal`]), a least-squares
//! refit over an arbitrary support ([`refit`]) and a point-to-instance
//! distance ([`residual`]). Instances are immutable once built and always
//! stored in a canonical parameterization, so two instances describing the
//! same geometric object compare parameter-wise equal up to rounding.

mod homography;
mod solvers;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use solvers::{fit_minimal, refit};

/// Relative collinearity tolerance: a triangle is degenerate when its area
/// falls below this fraction of the squared bounding-box diagonal.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-9;
/// Two unit normals are parallel when the norm of their cross product is below this.
pub const PARALLEL_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    #[serde(rename = "line")]
    Line2D,
    #[serde(rename = "circle")]
    Circle2D,
    Homography,
    #[serde(rename = "plane")]
    Plane3D,
    #[serde(rename = "cylinder")]
    Cylinder3D,
    Outlier,
}

/// Which kind of datum a class consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Point2,
    Point3,
    Correspondence,
    Any,
}

impl ModelClass {
    pub const fn minimal_sample_size(self) -> usize {
        match self {
            ModelClass::Line2D => 2,
            ModelClass::Circle2D => 3,
            ModelClass::Homography => 4,
            ModelClass::Plane3D => 3,
            ModelClass::Cylinder3D => 2,
            ModelClass::Outlier => 0,
        }
    }

    pub const fn parameter_count(self) -> usize {
        match self {
            ModelClass::Line2D => 2,
            ModelClass::Circle2D => 3,
            ModelClass::Homography => 9,
            ModelClass::Plane3D => 4,
            ModelClass::Cylinder3D => 7,
            ModelClass::Outlier => 0,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ModelClass::Line2D => "line",
            ModelClass::Circle2D => "circle",
            ModelClass::Homography => "homography",
            ModelClass::Plane3D => "plane",
            ModelClass::Cylinder3D => "cylinder",
            ModelClass::Outlier => "outlier",
        }
    }

    pub const fn data_kind(self) -> DataKind {
        match self {
            ModelClass::Line2D | ModelClass::Circle2D => DataKind::Point2,
            ModelClass::Homography => DataKind::Correspondence,
            ModelClass::Plane3D | ModelClass::Cylinder3D => DataKind::Point3,
            ModelClass::Outlier => DataKind::Any,
        }
    }

    pub const fn needs_normals(self) -> bool {
        matches!(self, ModelClass::Cylinder3D)
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "line" | "line2d" => Ok(ModelClass::Line2D),
            "circle" | "circle2d" => Ok(ModelClass::Circle2D),
            "homography" | "h" => Ok(ModelClass::Homography),
            "plane" | "plane3d" => Ok(ModelClass::Plane3D),
            "cylinder" | "cylinder3d" => Ok(ModelClass::Cylinder3D),
            other => Err(Error::ConfigInvalid(format!("unknown model class '{other}'"))),
        }
    }
}

/// A 2D or 3D point, optionally carrying a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; 3],
    dim: u8,
    normal: Option<[f64; 3]>,
}

impl Point {
    pub fn new2(x: f64, y: f64) -> Self {
        Point { coords: [x, y, 0.0], dim: 2, normal: None }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Point { coords: [x, y, z], dim: 3, normal: None }
    }

    /// Attaches a normal, rescaled to unit length. Zero or non-finite
    /// normals are dropped.
    pub fn with_normal(mut self, n: [f64; 3]) -> Self {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        self.normal = (len.is_finite() && len > 0.0).then(|| [n[0] / len, n[1] / len, n[2] / len]);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn z(&self) -> f64 {
        self.coords[2]
    }

    pub fn normal(&self) -> Option<[f64; 3]> {
        self.normal
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub(crate) fn vec3(&self) -> Vector3<f64> {
        Vector3::new(self.coords[0], self.coords[1], self.coords[2])
    }
}

/// A point match between two images, in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    xy: [f64; 4],
}

impl Correspondence {
    pub fn new(source: [f64; 2], target: [f64; 2]) -> Self {
        Correspondence { xy: [source[0], source[1], target[0], target[1]] }
    }

    pub fn source(&self) -> [f64; 2] {
        [self.xy[0], self.xy[1]]
    }

    pub fn target(&self) -> [f64; 2] {
        [self.xy[2], self.xy[3]]
    }

    pub fn is_finite(&self) -> bool {
        self.xy.iter().all(|c| c.is_finite())
    }
}

/// One input observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Datum {
    Point(Point),
    Correspondence(Correspondence),
}

impl Datum {
    /// Coordinates used for spatial neighborhoods: the point itself, or the
    /// stacked source and target of a correspondence.
    pub fn position(&self) -> &[f64] {
        match self {
            Datum::Point(p) => p.coords(),
            Datum::Correspondence(c) => &c.xy,
        }
    }

    pub fn kind(&self) -> DataKind {
        match self {
            Datum::Point(p) if p.dim == 2 => DataKind::Point2,
            Datum::Point(_) => DataKind::Point3,
            Datum::Correspondence(_) => DataKind::Correspondence,
        }
    }

    pub fn as_point(&self) -> Option<&Point> {
        match self {
            Datum::Point(p) => Some(p),
            Datum::Correspondence(_) => None,
        }
    }

    pub fn as_correspondence(&self) -> Option<&Correspondence> {
        match self {
            Datum::Correspondence(c) => Some(c),
            Datum::Point(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Datum::Point(p) => p.is_finite(),
            Datum::Correspondence(c) => c.is_finite(),
        }
    }
}

impl From<Point> for Datum {
    fn from(p: Point) -> Self {
        Datum::Point(p)
    }
}

impl From<Correspondence> for Datum {
    fn from(c: Correspondence) -> Self {
        Datum::Correspondence(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceState {
    Putative,
    Active,
}

#[derive(Clone, Debug, PartialEq)]
enum Derived {
    None,
    Inverse(Matrix3<f64>),
    Constant(f64),
    // (cos alpha, sin alpha) of a line normal
    Normal(f64, f64),
}

/// A single model hypothesis in canonical parameterization.
///
/// Parameter layouts:
/// - line: `[alpha, c]`, unit normal `(cos alpha, sin alpha)`
/// - circle: `[cx, cy, r]`
/// - homography: 3x3 row-major, unit Frobenius norm
/// - plane: `[nx, ny, nz, d]` with `n . p + d = 0`
/// - cylinder: `[px, py, pz, dx, dy, dz, r]`, `p` the axis point closest to the origin
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    class: ModelClass,
    params: Vec<f64>,
    state: InstanceState,
    derived: Derived,
}

fn invalid(class: ModelClass, reason: &'static str) -> Error {
    Error::InvalidParameters { class: class.name(), reason }
}

/// Flips `v` so that its first entry with magnitude above `eps` is positive.
fn canonical_sign(v: &mut [f64], eps: f64) -> bool {
    match v.iter().find(|x| x.abs() > eps) {
        Some(&first) if first < 0.0 => {
            v.iter_mut().for_each(|x| *x = -*x);
            true
        }
        _ => false,
    }
}

impl Instance {
    /// Validates and canonicalizes `params` for `class`.
    pub fn new(class: ModelClass, params: Vec<f64>) -> Result<Self> {
        if class == ModelClass::Outlier {
            return Err(invalid(class, "use Instance::outlier"));
        }
        if params.len() != class.parameter_count() {
            return Err(invalid(class, "wrong parameter count"));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(invalid(class, "non-finite parameter"));
        }
        let mut params = params;
        let mut derived = Derived::None;
        match class {
            ModelClass::Line2D => {
                let (mut alpha, mut c) = (params[0], params[1]);
                if c < 0.0 {
                    alpha += PI;
                    c = -c;
                }
                alpha = alpha.rem_euclid(TAU);
                if c == 0.0 && alpha >= PI {
                    alpha -= PI;
                }
                if alpha >= TAU {
                    alpha = 0.0;
                }
                let (s, co) = alpha.sin_cos();
                derived = Derived::Normal(co, s);
                params = vec![alpha, c];
            }
            ModelClass::Circle2D => {
                if params[2] <= 0.0 {
                    return Err(invalid(class, "radius must be positive"));
                }
            }
            ModelClass::Homography => {
                let norm = params.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(invalid(class, "zero matrix"));
                }
                params.iter_mut().for_each(|x| *x /= norm);
                canonical_sign(&mut params, 0.0);
                let h = Matrix3::from_row_slice(&params);
                let inv = h.try_inverse().ok_or_else(|| invalid(class, "singular matrix"))?;
                derived = Derived::Inverse(inv);
            }
            ModelClass::Plane3D => {
                let n = Vector3::new(params[0], params[1], params[2]);
                let len = n.norm();
                if len == 0.0 {
                    return Err(invalid(class, "zero normal"));
                }
                params.iter_mut().for_each(|x| *x /= len);
                canonical_sign(&mut params[..3], 1e-12);
                // keep d consistent with the (possibly) flipped normal
                let flipped = (params[0] * n[0] + params[1] * n[1] + params[2] * n[2]) < 0.0;
                if flipped {
                    params[3] = -params[3];
                }
            }
            ModelClass::Cylinder3D => {
                let mut d = Vector3::new(params[3], params[4], params[5]);
                let len = d.norm();
                if len == 0.0 {
                    return Err(invalid(class, "zero axis direction"));
                }
                if params[6] <= 0.0 {
                    return Err(invalid(class, "radius must be positive"));
                }
                d /= len;
                let mut dv = [d.x, d.y, d.z];
                canonical_sign(&mut dv, 1e-12);
                let d = Vector3::from(dv);
                let p = Vector3::new(params[0], params[1], params[2]);
                let p = p - d * p.dot(&d);
                params = vec![p.x, p.y, p.z, d.x, d.y, d.z, params[6]];
            }
            ModelClass::Outlier => unreachable!(),
        }
        Ok(Instance { class, params, state: InstanceState::Putative, derived })
    }

    /// The outlier class: constant distance `k` to every datum.
    pub fn outlier(k: f64) -> Self {
        Instance {
            class: ModelClass::Outlier,
            params: Vec::new(),
            state: InstanceState::Active,
            derived: Derived::Constant(k),
        }
    }

    pub fn class(&self) -> ModelClass {
        self.class
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn state(&self) -> InstanceState {
        self.state
    }

    pub fn activated(mut self) -> Self {
        self.state = InstanceState::Active;
        self
    }

    pub fn with_state(mut self, state: InstanceState) -> Self {
        self.state = state;
        self
    }

    /// Homography as a matrix; `None` for other classes.
    pub fn homography(&self) -> Option<Matrix3<f64>> {
        (self.class == ModelClass::Homography).then(|| Matrix3::from_row_slice(&self.params))
    }
}

fn transfer(h: &Matrix3<f64>, p: [f64; 2]) -> Option<[f64; 2]> {
    let v = h * Vector3::new(p[0], p[1], 1.0);
    (v.z.abs() > f64::EPSILON * v.x.abs().max(v.y.abs()).max(1.0))
        .then(|| [v.x / v.z, v.y / v.z])
}

fn sq_dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

impl Instance {
    /// `(cos alpha, sin alpha, c)` for a line, `None` for other classes.
    pub(crate) fn line_equation(&self) -> Option<(f64, f64, f64)> {
        match (self.class, &self.derived) {
            (ModelClass::Line2D, Derived::Normal(c, s)) => Some((*c, *s, self.params[1])),
            _ => None,
        }
    }
}

/// Point-to-instance distance in scene units. A datum of the wrong kind is
/// infinitely far away.
pub fn residual(instance: &Instance, datum: &Datum) -> f64 {
    let p = &instance.params;
    match (instance.class, datum) {
        (ModelClass::Outlier, _) => match instance.derived {
            Derived::Constant(k) => k,
            _ => f64::INFINITY,
        },
        (ModelClass::Line2D, Datum::Point(q)) => {
            let (c, s) = match instance.derived {
                Derived::Normal(c, s) => (c, s),
                _ => (p[0].cos(), p[0].sin()),
            };
            (c * q.x() + s * q.y() + p[1]).abs()
        }
        (ModelClass::Circle2D, Datum::Point(q)) => {
            ((q.x() - p[0]).hypot(q.y() - p[1]) - p[2]).abs()
        }
        (ModelClass::Plane3D, Datum::Point(q)) => {
            (p[0] * q.x() + p[1] * q.y() + p[2] * q.z() + p[3]).abs()
        }
        (ModelClass::Cylinder3D, Datum::Point(q)) => {
            let a = Vector3::new(p[0], p[1], p[2]);
            let d = Vector3::new(p[3], p[4], p[5]);
            let v = q.vec3() - a;
            let radial = v - d * v.dot(&d);
            (radial.norm() - p[6]).abs()
        }
        (ModelClass::Homography, Datum::Correspondence(c)) => {
            let Derived::Inverse(inv) = &instance.derived else {
                return f64::INFINITY;
            };
            let h = Matrix3::from_row_slice(p);
            match (transfer(&h, c.source()), transfer(inv, c.target())) {
                (Some(fwd), Some(bwd)) => {
                    (0.5 * (sq_dist2(fwd, c.target()) + sq_dist2(bwd, c.source()))).sqrt()
                }
                _ => f64::INFINITY,
            }
        }
        _ => f64::INFINITY,
    }
}

/// Residuals of `instance` over all of `data`.
pub fn residuals(instance: &Instance, data: &[Datum]) -> Vec<f64> {
    data.iter().map(|d| residual(instance, d)).collect()
}
