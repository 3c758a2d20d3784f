//! C ABI over `progx`.
//!
//! All objects are opaque handles created and destroyed by this library.
//! Fallible calls return a [`ProgxStatus`]; constructors return `NULL` on
//! failure. In both cases [`progx_last_error`] describes the most recent
//! failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use progx::datasets::{load_scene, SceneFormat};
use progx::geometry::{Correspondence, Datum, ModelClass, Point};
use progx::neighborhood::NeighborhoodMode;
use progx::progx::{run, FittingResult, ProgXConfig};
use progx::report::ResultDoc;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProgxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    OutOfRange = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProgxClass {
    Line = 0,
    Circle = 1,
    Homography = 2,
    Plane = 3,
    Cylinder = 4,
}

impl From<ProgxClass> for ModelClass {
    fn from(c: ProgxClass) -> Self {
        match c {
            ProgxClass::Line => ModelClass::Line2D,
            ProgxClass::Circle => ModelClass::Circle2D,
            ProgxClass::Homography => ModelClass::Homography,
            ProgxClass::Plane => ModelClass::Plane3D,
            ProgxClass::Cylinder => ModelClass::Cylinder3D,
        }
    }
}

fn class_code(c: ModelClass) -> ProgxClass {
    match c {
        ModelClass::Line2D => ProgxClass::Line,
        ModelClass::Circle2D => ProgxClass::Circle,
        ModelClass::Homography => ProgxClass::Homography,
        ModelClass::Plane3D => ProgxClass::Plane,
        ModelClass::Cylinder3D => ProgxClass::Cylinder,
        ModelClass::Outlier => unreachable!("results never contain outlier instances"),
    }
}

/// A set of data points or correspondences.
pub struct ProgxScene {
    data: Vec<Datum>,
}

/// Fitting parameters; starts from the library defaults.
pub struct ProgxConfig {
    inner: ProgXConfig,
}

/// The outcome of one fit.
pub struct ProgxResult {
    result: FittingResult,
    config: ProgXConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("interior nuls removed"));
}

fn clear_error() {
    set_error("");
}

fn fail(status: ProgxStatus, msg: impl Into<String>) -> ProgxStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting panics into [`ProgxStatus::Panic`].
fn guard(f: impl FnOnce() -> ProgxStatus) -> ProgxStatus {
    clear_error();
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(ProgxStatus::Panic, "internal panic"))
}

fn guard_ptr<T>(f: impl FnOnce() -> Result<T, String>) -> *mut T {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Box::into_raw(Box::new(v)),
        Ok(Err(msg)) => {
            set_error(msg);
            ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

/// Message describing the last failure on this thread; empty after a
/// successful call. Valid until the next call into this library.
#[no_mangle]
pub extern "C" fn progx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn progx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn rows<'a>(values: *const f64, n: usize, width: usize) -> Result<&'a [f64], String> {
    if n == 0 {
        return Err("scene must not be empty".into());
    }
    if values.is_null() {
        return Err("null coordinate buffer".into());
    }
    let len = n.checked_mul(width).ok_or("point count overflows")?;
    Ok(std::slice::from_raw_parts(values, len))
}

fn finite(data: Vec<Datum>) -> Result<ProgxScene, String> {
    match data.iter().position(|d| !d.is_finite()) {
        Some(i) => Err(format!("point {i} is not finite")),
        None => Ok(ProgxScene { data }),
    }
}

/// Scene of `n` planar points from interleaved `x y` pairs.
///
/// # Safety
/// `xy` must point to `2 * n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn progx_scene_from_points2(xy: *const f64, n: usize) -> *mut ProgxScene {
    guard_ptr(|| {
        let v = rows(xy, n, 2)?;
        finite(v.chunks_exact(2).map(|c| Point::new2(c[0], c[1]).into()).collect())
    })
}

/// Scene of `n` spatial points from interleaved `x y z` triples.
///
/// # Safety
/// `xyz` must point to `3 * n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn progx_scene_from_points3(xyz: *const f64, n: usize) -> *mut ProgxScene {
    guard_ptr(|| {
        let v = rows(xyz, n, 3)?;
        finite(v.chunks_exact(3).map(|c| Point::new3(c[0], c[1], c[2]).into()).collect())
    })
}

/// Scene of `n` oriented points from interleaved `x y z nx ny nz` rows.
///
/// # Safety
/// `rows_ptr` must point to `6 * n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn progx_scene_from_oriented_points3(rows_ptr: *const f64, n: usize) -> *mut ProgxScene {
    guard_ptr(|| {
        let v = rows(rows_ptr, n, 6)?;
        let data = v
            .chunks_exact(6)
            .enumerate()
            .map(|(i, c)| {
                let p = Point::new3(c[0], c[1], c[2]).with_normal([c[3], c[4], c[5]]);
                match p.normal() {
                    Some(_) => Ok(Datum::from(p)),
                    None => Err(format!("point {i} has a zero or non-finite normal")),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        finite(data)
    })
}

/// Scene of `n` correspondences from interleaved `x1 y1 x2 y2` rows.
///
/// # Safety
/// `rows_ptr` must point to `4 * n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn progx_scene_from_correspondences(rows_ptr: *const f64, n: usize) -> *mut ProgxScene {
    guard_ptr(|| {
        let v = rows(rows_ptr, n, 4)?;
        finite(v.chunks_exact(4).map(|c| Correspondence::new([c[0], c[1]], [c[2], c[3]]).into()).collect())
    })
}

/// Loads a scene file; `format` is `"xy"`, `"xyz"` or `"corr"`.
///
/// # Safety
/// `path` and `format` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn progx_scene_load(path: *const c_char, format: *const c_char) -> *mut ProgxScene {
    guard_ptr(|| {
        if path.is_null() || format.is_null() {
            return Err("null argument".into());
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| "path is not UTF-8")?;
        let format: SceneFormat = CStr::from_ptr(format).to_str().map_err(|_| "format is not UTF-8")?.parse().map_err(|e: progx::Error| e.to_string())?;
        let scene = load_scene(Path::new(path), format).map_err(|e| format!("{path}: {e}"))?;
        Ok(ProgxScene { data: scene.data })
    })
}

/// Number of points in the scene, 0 for `NULL`.
///
/// # Safety
/// `scene` must be `NULL` or a live scene handle.
#[no_mangle]
pub unsafe extern "C" fn progx_scene_len(scene: *const ProgxScene) -> usize {
    scene.as_ref().map_or(0, |s| s.data.len())
}

/// # Safety
/// `scene` must be `NULL` or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn progx_scene_free(scene: *mut ProgxScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

#[no_mangle]
pub extern "C" fn progx_config_new() -> *mut ProgxConfig {
    guard_ptr(|| Ok(ProgxConfig { inner: ProgXConfig::default() }))
}

/// # Safety
/// `config` must be `NULL` or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn progx_config_free(config: *mut ProgxConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Applies `edit` to a copy of the configuration and commits it only if the
/// result is valid.
unsafe fn edit_config(config: *mut ProgxConfig, edit: impl FnOnce(&mut ProgXConfig)) -> ProgxStatus {
    guard(|| {
        let Some(c) = config.as_mut() else { return fail(ProgxStatus::NullPointer, "null config") };
        let mut next = c.inner.clone();
        edit(&mut next);
        match next.validate() {
            Ok(()) => {
                c.inner = next;
                ProgxStatus::Ok
            }
            Err(e) => fail(ProgxStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_threshold(config: *mut ProgxConfig, value: f64) -> ProgxStatus {
    edit_config(config, |c| c.threshold = value)
}

/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_confidence(config: *mut ProgxConfig, value: f64) -> ProgxStatus {
    edit_config(config, |c| c.confidence = value)
}

/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_jaccard_epsilon(config: *mut ProgxConfig, value: f64) -> ProgxStatus {
    edit_config(config, |c| c.jaccard_epsilon = value)
}

/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_spatial_weight(config: *mut ProgxConfig, value: f64) -> ProgxStatus {
    edit_config(config, |c| c.spatial_weight = value)
}

/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_label_cost(config: *mut ProgxConfig, value: f64) -> ProgxStatus {
    edit_config(config, |c| c.label_cost = value)
}

/// Minimum instance support; 0 restores the per-class default `m + 1`.
///
/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_min_support(config: *mut ProgxConfig, value: usize) -> ProgxStatus {
    edit_config(config, |c| c.min_support = (value > 0).then_some(value))
}

/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_seed(config: *mut ProgxConfig, value: u64) -> ProgxStatus {
    edit_config(config, |c| c.seed = value)
}

/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_max_proposals(config: *mut ProgxConfig, value: usize) -> ProgxStatus {
    edit_config(config, |c| c.max_proposals = value)
}

/// Grid neighborhood with the given cell size; 0 restores the default grid.
///
/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_grid_cell(config: *mut ProgxConfig, cell_size: f64) -> ProgxStatus {
    if !(cell_size >= 0.0 && cell_size.is_finite()) {
        return fail(ProgxStatus::InvalidArgument, "cell size must be nonnegative");
    }
    edit_config(config, |c| c.neighborhood = (cell_size > 0.0).then_some(NeighborhoodMode::Grid { cell_size }))
}

/// Symmetrized k-nearest-neighbor graph instead of a grid.
///
/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_knn(config: *mut ProgxConfig, k: usize) -> ProgxStatus {
    if k == 0 {
        return fail(ProgxStatus::InvalidArgument, "k must be positive");
    }
    edit_config(config, |c| c.neighborhood = Some(NeighborhoodMode::Knn { k }))
}

/// Classes proposed in round-robin order.
///
/// # Safety
/// `config` must be a live config handle and `classes` must point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn progx_config_set_classes(config: *mut ProgxConfig, classes: *const ProgxClass, n: usize) -> ProgxStatus {
    if classes.is_null() {
        return fail(ProgxStatus::NullPointer, "null class list");
    }
    let list: Vec<ModelClass> = std::slice::from_raw_parts(classes, n).iter().map(|&c| c.into()).collect();
    edit_config(config, |c| c.classes = list)
}

/// Fits the scene; on success `*out` receives a new result handle.
///
/// # Safety
/// `scene` and `config` must be live handles and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn progx_fit(scene: *const ProgxScene, config: *const ProgxConfig, out: *mut *mut ProgxResult) -> ProgxStatus {
    guard(|| {
        let (Some(scene), Some(config), false) = (scene.as_ref(), config.as_ref(), out.is_null()) else {
            return fail(ProgxStatus::NullPointer, "null argument");
        };
        match run(&scene.data, &config.inner) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(ProgxResult { result, config: config.inner.clone() }));
                ProgxStatus::Ok
            }
            Err(e) => fail(ProgxStatus::DataError, e.to_string()),
        }
    })
}

/// # Safety
/// `result` must be `NULL` or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn progx_result_free(result: *mut ProgxResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of fitted instances, 0 for `NULL`.
///
/// # Safety
/// `result` must be `NULL` or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn progx_result_instance_count(result: *const ProgxResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.instances.len())
}

/// Class and parameters of instance `index`. `*len` receives the parameter
/// count; `params` may be `NULL` to query it.
///
/// # Safety
/// `result` must be live; `class_out` and `len` writable; `params` `NULL` or
/// writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn progx_result_instance(
    result: *const ProgxResult,
    index: usize,
    class_out: *mut ProgxClass,
    params: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> ProgxStatus {
    guard(|| {
        let (Some(r), false, false) = (result.as_ref(), class_out.is_null(), len.is_null()) else {
            return fail(ProgxStatus::NullPointer, "null argument");
        };
        let Some(h) = r.result.instances.get(index) else {
            return fail(ProgxStatus::OutOfRange, format!("instance {index} of {}", r.result.instances.len()));
        };
        *class_out = class_code(h.class());
        *len = h.params().len();
        if params.is_null() {
            return ProgxStatus::Ok;
        }
        if capacity < h.params().len() {
            return fail(ProgxStatus::BufferTooSmall, format!("need {} doubles", h.params().len()));
        }
        std::slice::from_raw_parts_mut(params, h.params().len()).copy_from_slice(h.params());
        ProgxStatus::Ok
    })
}

/// Copies one label per point: 0 for outliers, `k + 1` for instance `k`.
///
/// # Safety
/// `result` must be live and `labels` writable for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn progx_result_labels(result: *const ProgxResult, labels: *mut usize, capacity: usize) -> ProgxStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), labels.is_null()) else {
            return fail(ProgxStatus::NullPointer, "null argument");
        };
        let a = &r.result.labeling.assignment;
        if capacity < a.len() {
            return fail(ProgxStatus::BufferTooSmall, format!("need {} labels", a.len()));
        }
        std::slice::from_raw_parts_mut(labels, a.len()).copy_from_slice(a);
        ProgxStatus::Ok
    })
}

/// Total labeling energy of the result, NaN for `NULL`.
///
/// # Safety
/// `result` must be `NULL` or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn progx_result_energy(result: *const ProgxResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.result.labeling.energy.total)
}

/// The result document as JSON; release with [`progx_string_free`].
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn progx_result_json(result: *const ProgxResult) -> *mut c_char {
    clear_error();
    let Some(r) = result.as_ref() else {
        set_error("null result");
        return ptr::null_mut();
    };
    match catch_unwind(AssertUnwindSafe(|| ResultDoc::new(&r.result, &r.config, false).to_json())) {
        Ok(json) => CString::new(json).expect("json has no interior nul").into_raw(),
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be `NULL` or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn progx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
