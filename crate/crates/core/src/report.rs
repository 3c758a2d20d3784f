//! Result documents (JSON and CSV) and SVG plots of a labeling.
//!
//! Floating-point numbers in JSON are written with 17 significant digits, so
//! every value reads back bit-exactly.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Datum, Instance, ModelClass};
use crate::labeling::{EnergyBreakdown, OUTLIER};
use crate::progx::{FittingResult, IterationEvent, ProgXConfig, Snapshot, TerminationReason};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub class: ModelClass,
    pub params: Vec<f64>,
}

impl From<&Instance> for InstanceDoc {
    fn from(h: &Instance) -> Self {
        InstanceDoc { class: h.class(), params: h.params().to_vec() }
    }
}

impl InstanceDoc {
    pub fn to_instance(&self) -> Result<Instance> {
        Instance::new(self.class, self.params.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDoc {
    pub iteration: usize,
    pub class: ModelClass,
    pub event: IterationEvent,
    pub instance_count: usize,
    pub energy: EnergyBreakdown,
    pub max_remaining_inliers: f64,
    pub samples: u64,
    pub elapsed_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<Vec<InstanceDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

impl SnapshotDoc {
    /// Summary of `s`; `full` also records its instances and labels.
    pub fn new(s: &Snapshot, full: bool) -> Self {
        SnapshotDoc {
            iteration: s.iteration,
            class: s.class,
            event: s.event,
            instance_count: s.instances.len(),
            energy: s.labeling.energy,
            max_remaining_inliers: s.max_remaining_inliers,
            samples: s.samples,
            elapsed_ms: s.elapsed_ms,
            instances: full.then(|| s.instances.iter().map(InstanceDoc::from).collect()),
            labels: full.then(|| s.labeling.assignment.clone()),
        }
    }
}

/// The `fit` output. Label `0` is the outlier label, label `k` refers to
/// `instances[k - 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDoc {
    pub instances: Vec<InstanceDoc>,
    pub labels: Vec<usize>,
    pub energy: EnergyBreakdown,
    pub snapshots: Vec<SnapshotDoc>,
    pub config: ProgXConfig,
    pub termination: TerminationReason,
    pub samples: u64,
    pub timing_ms: f64,
}

impl ResultDoc {
    pub fn new(result: &FittingResult, config: &ProgXConfig, full_snapshots: bool) -> Self {
        ResultDoc {
            instances: result.instances.iter().map(InstanceDoc::from).collect(),
            labels: result.labeling.assignment.clone(),
            energy: result.labeling.energy,
            snapshots: result.snapshots.iter().map(|s| SnapshotDoc::new(s, full_snapshots)).collect(),
            config: config.clone(),
            termination: result.termination,
            samples: result.samples,
            timing_ms: result.elapsed_ms,
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits);
        self.serialize(&mut ser).expect("result documents always serialize");
        out.push(b'\n');
        String::from_utf8(out).expect("json is utf-8")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ResultDoc = serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        if let Some(&bad) = doc.labels.iter().find(|&&l| l > doc.instances.len()) {
            return Err(Error::Parse { line: 0, message: format!("label {bad} exceeds the instance count") });
        }
        Ok(doc)
    }

    /// One `point,label` row per point.
    pub fn labels_csv(&self) -> String {
        let mut s = String::from("point,label\n");
        for (p, l) in self.labels.iter().enumerate() {
            let _ = writeln!(s, "{p},{l}");
        }
        s
    }
}

/// `%.17g`: the shortest fixed or scientific rendering with 17 significant digits.
pub fn format_significant(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..17).contains(&exp) {
        trim(&format!("{x:.*}", (16 - exp) as usize))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_significant(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

fn label_color(label: usize) -> String {
    if label == OUTLIER {
        return "#ffffff".into();
    }
    // golden-angle hue steps keep neighboring labels apart
    let hue = (label as f64 * 137.508) % 360.0;
    let (s, v) = (0.85, 0.95);
    let c = v * s;
    let h = hue / 60.0;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let byte = |u: f64| ((u + m) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

/// Scatter plot of the labeling on a dark background, outliers in white.
/// Points are drawn by their first two coordinates; correspondences by
/// their source point.
pub fn render_svg(data: &[Datum], labels: &[usize], width: f64) -> Result<String> {
    if data.len() != labels.len() {
        return Err(Error::ConfigInvalid("labels and data differ in length".into()));
    }
    let xy: Vec<[f64; 2]> = data
        .iter()
        .map(|d| match d {
            Datum::Point(p) => [p.x(), p.y()],
            Datum::Correspondence(c) => c.source(),
        })
        .collect();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &[x, y] in &xy {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if xy.is_empty() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let margin = 10.0;
    let scale = (width - 2.0 * margin) / span;
    let height = (y1 - y0) * scale + 2.0 * margin;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#101018"/>"##);
    // outliers first so that instances stay visible on top
    let mut order: Vec<usize> = (0..xy.len()).collect();
    order.sort_by_key(|&p| (labels[p] != OUTLIER, labels[p]));
    for p in order {
        let [x, y] = xy[p];
        let cx = margin + (x - x0) * scale;
        // image y grows downwards
        let cy = margin + (y1 - y) * scale;
        let _ = writeln!(svg, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="1.6" fill="{}"/>"#, label_color(labels[p]));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn significant_digits_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut values = vec![0.1, 1.0 / 3.0, 1e-300, 5e-324, f64::MAX, -2.5, 123456789.0, 1e17, 1e16];
        values.extend((0..2000).map(|_| f64::from_bits(rng.gen::<u64>() >> 2)));
        values.extend((0..2000).map(|_| rng.gen_range(-1e6..1e6)));
        for x in values.into_iter().filter(|x| x.is_finite()) {
            let s = format_significant(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn significant_digits_examples() {
        assert_eq!(format_significant(0.0), "0");
        assert_eq!(format_significant(2.0), "2");
        assert_eq!(format_significant(0.1), "0.10000000000000001");
        assert_eq!(format_significant(-1.5e-7), "-1.4999999999999999e-7");
        assert_eq!(format_significant(1e20), "1e20");
    }

    #[test]
    fn colors_are_distinct_and_outliers_white() {
        assert_eq!(label_color(OUTLIER), "#ffffff");
        let colors: std::collections::HashSet<String> = (1..=12).map(label_color).collect();
        assert_eq!(colors.len(), 12);
    }

    #[test]
    fn svg_has_one_circle_per_point() {
        let data: Vec<Datum> = (0..5).map(|i| Point::new2(i as f64, 2.0 * i as f64).into()).collect();
        let svg = render_svg(&data, &[0, 1, 1, 2, 0], 400.0).unwrap();
        assert_eq!(svg.matches("<circle").count(), 5);
        assert_eq!(svg.matches("#ffffff").count(), 2);
        assert!(render_svg(&data, &[0], 400.0).is_err());
    }
}
