//! Detection-to-annotation matching and summary metrics.

use std::fmt::Write as _;
use std::io::Write;

use crate::annotation::{Annotation, Kind};
use crate::error::{Error, Result};
use crate::geom::{axis_distance, orientation_distance};
use crate::grid::Grid;
use crate::instancer::Detection;

pub const MATCH_RADIUS: f64 = 35.0;
pub const BOUNDARY_MARGIN: f64 = 50.0;

/// Published reference profile of a full-quality recurrent detector.
pub mod reference {
    pub const TP_RATE: f64 = 0.96;
    pub const FP_RATE: f64 = 0.14;
    pub const POSITION_MEDIAN: f64 = 5.1;
    pub const ORIENTATION_MEDIAN: f64 = 15.2;
    pub const AXIS_MEDIAN: f64 = 10.6;
    pub const DIRECTED_MEDIAN: f64 = 12.1;
    /// Inter-rater variability of human annotators.
    pub const HUMAN_FP_RATE: f64 = 0.15;
    pub const HUMAN_CLASS_ERROR: f64 = 0.04;
    pub const HUMAN_POSITION_MEDIAN: f64 = 6.7;
    pub const HUMAN_ORIENTATION_MEDIAN: f64 = 7.7;
}

/// One frame's assignment of detections to annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub annotations: Vec<Annotation>,
    pub detections: Vec<Detection>,
    /// `(annotation index, detection index)` in matching order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_annotations: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
    pub width: usize,
    pub height: usize,
    pub radius: f64,
}

impl Matching {
    pub fn false_positives(&self) -> impl Iterator<Item = &Detection> + '_ {
        self.unmatched_detections.iter().map(|&i| &self.detections[i])
    }
}

/// Greedy matching on ascending centroid distance; ties go to the earlier
/// annotation, then the earlier detection.
pub fn match_detections(
    annotations: &[Annotation],
    detections: &[Detection],
    radius: f64,
    width: usize,
    height: usize,
) -> Matching {
    let mut candidates = Vec::new();
    for (ai, a) in annotations.iter().enumerate() {
        for (di, d) in detections.iter().enumerate() {
            let dist = (a.x - d.x).hypot(a.y - d.y);
            if dist <= radius {
                candidates.push((dist, ai, di));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut a_used = vec![false; annotations.len()];
    let mut d_used = vec![false; detections.len()];
    let mut pairs = Vec::new();
    for (_, ai, di) in candidates {
        if !a_used[ai] && !d_used[di] {
            a_used[ai] = true;
            d_used[di] = true;
            pairs.push((ai, di));
        }
    }
    Matching {
        annotations: annotations.to_vec(),
        detections: detections.to_vec(),
        pairs,
        unmatched_annotations: (0..annotations.len()).filter(|&i| !a_used[i]).collect(),
        unmatched_detections: (0..detections.len()).filter(|&i| !d_used[i]).collect(),
        width,
        height,
        radius,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    Margin50,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Margin50 => "margin50",
        }
    }
}

fn interior(x: f64, y: f64, width: usize, height: usize) -> bool {
    let m = BOUNDARY_MARGIN;
    x >= m && y >= m && width as f64 - x >= m && height as f64 - y >= m
}

/// The part of a matching at least 50 px from every edge. A matched pair
/// stays or goes with its annotation, so a correct detection whose centroid
/// lands on the other side of the cut is never turned into an error.
pub fn restrict_to_interior(m: &Matching) -> Matching {
    let inside_a = |i: usize| interior(m.annotations[i].x, m.annotations[i].y, m.width, m.height);
    let inside_d = |i: usize| interior(m.detections[i].x, m.detections[i].y, m.width, m.height);
    let kept_pairs: Vec<(usize, usize)> = m.pairs.iter().copied().filter(|&(a, _)| inside_a(a)).collect();
    let kept_fn: Vec<usize> = m.unmatched_annotations.iter().copied().filter(|&a| inside_a(a)).collect();
    let kept_fp: Vec<usize> = m.unmatched_detections.iter().copied().filter(|&d| inside_d(d)).collect();
    let mut annotations = Vec::new();
    let mut detections = Vec::new();
    let mut pairs = Vec::new();
    for &(a, d) in &kept_pairs {
        pairs.push((annotations.len(), detections.len()));
        annotations.push(m.annotations[a]);
        detections.push(m.detections[d]);
    }
    let unmatched_annotations = (annotations.len()..annotations.len() + kept_fn.len()).collect();
    annotations.extend(kept_fn.iter().map(|&a| m.annotations[a]));
    let unmatched_detections = (detections.len()..detections.len() + kept_fp.len()).collect();
    detections.extend(kept_fp.iter().map(|&d| m.detections[d]));
    Matching {
        annotations,
        detections,
        pairs,
        unmatched_annotations,
        unmatched_detections,
        width: m.width,
        height: m.height,
        radius: m.radius,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorStats {
    pub median: f64,
    pub mean: f64,
}

/// Lower median and mean; `None` for an empty sample.
pub fn summarize(values: &[f64]) -> Option<ErrorStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(ErrorStats { median: v[(v.len() - 1) / 2], mean: v.iter().sum::<f64>() / v.len() as f64 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub variant: Variant,
    pub annotations: usize,
    pub detections: usize,
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub class_error_rate: f64,
    pub position_error: Option<ErrorStats>,
    /// Angle errors cover FullBee annotations only.
    pub orientation_error: Option<ErrorStats>,
    pub axis_error: Option<ErrorStats>,
    pub directed_error: Option<ErrorStats>,
}

/// Per-pair errors gathered across frames.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairErrors {
    pub position: Vec<f64>,
    pub orientation: Vec<f64>,
    pub axis: Vec<f64>,
    pub directed: Vec<f64>,
    pub class_mismatches: usize,
}

pub fn pair_errors(matchings: &[Matching]) -> PairErrors {
    let mut e = PairErrors::default();
    for m in matchings {
        for &(ai, di) in &m.pairs {
            let (a, d) = (&m.annotations[ai], &m.detections[di]);
            e.position.push((a.x - d.x).hypot(a.y - d.y));
            if a.kind != d.kind {
                e.class_mismatches += 1;
            }
            if a.kind == Kind::FullBee {
                e.orientation.push(orientation_distance(a.angle, d.angle));
                e.axis.push(axis_distance(a.angle.axis(), d.axis));
                e.directed.push(orientation_distance(a.angle, d.directed));
            }
        }
    }
    e
}

pub fn compute_metrics(matchings: &[Matching], variant: Variant) -> Result<MetricsReport> {
    let restricted: Vec<Matching>;
    let matchings = match variant {
        Variant::Full => matchings,
        Variant::Margin50 => {
            restricted = matchings.iter().map(restrict_to_interior).collect();
            &restricted
        }
    };
    let annotations: usize = matchings.iter().map(|m| m.annotations.len()).sum();
    if annotations == 0 {
        return Err(Error::Data(format!("no annotations to evaluate against ({} variant)", variant.name())));
    }
    let detections = matchings.iter().map(|m| m.detections.len()).sum();
    let tp: usize = matchings.iter().map(|m| m.pairs.len()).sum();
    let fp: usize = matchings.iter().map(|m| m.unmatched_detections.len()).sum();
    let e = pair_errors(matchings);
    Ok(MetricsReport {
        variant,
        annotations,
        detections,
        tp_rate: tp as f64 / annotations as f64,
        fp_rate: fp as f64 / annotations as f64,
        class_error_rate: if tp == 0 { 0.0 } else { e.class_mismatches as f64 / tp as f64 },
        position_error: summarize(&e.position),
        orientation_error: summarize(&e.orientation),
        axis_error: summarize(&e.axis),
        directed_error: summarize(&e.directed),
    })
}

/// False-positive centroid counts in `bin`-pixel cells.
pub fn boundary_histogram(matchings: &[Matching], bin: usize) -> Result<Grid<u32>> {
    if bin == 0 {
        return Err(Error::Invalid("histogram bin must be positive".into()));
    }
    let (w, h) = matchings.iter().fold((0, 0), |(w, h), m| (w.max(m.width), h.max(m.height)));
    let mut hist = Grid::filled(w.div_ceil(bin).max(1), h.div_ceil(bin).max(1), 0u32);
    for m in matchings {
        for d in m.false_positives() {
            let bx = ((d.x.max(0.0) as usize) / bin).min(hist.width() - 1);
            let by = ((d.y.max(0.0) as usize) / bin).min(hist.height() - 1);
            *hist.get_mut(bx, by) += 1;
        }
    }
    Ok(hist)
}

/// Fraction of false positives closer than 50 px to an edge; `None` without FPs.
pub fn margin_fp_fraction(matchings: &[Matching]) -> Option<f64> {
    let (mut near, mut total) = (0usize, 0usize);
    for m in matchings {
        for d in m.false_positives() {
            total += 1;
            if !interior(d.x, d.y, m.width, m.height) {
                near += 1;
            }
        }
    }
    (total > 0).then(|| near as f64 / total as f64)
}

pub const REPORT_FIELDS: [&str; 14] = [
    "variant",
    "annotations",
    "detections",
    "tp_rate",
    "fp_rate",
    "class_error_rate",
    "position_error_median",
    "position_error_mean",
    "orientation_error_median",
    "orientation_error_mean",
    "axis_error_median",
    "axis_error_mean",
    "directed_error_median",
    "directed_error_mean",
];

impl MetricsReport {
    fn values(&self) -> [String; 14] {
        let stat = |s: Option<ErrorStats>, median: bool| match s {
            Some(s) => format!("{:.4}", if median { s.median } else { s.mean }),
            None => "NA".to_string(),
        };
        [
            self.variant.name().to_string(),
            self.annotations.to_string(),
            self.detections.to_string(),
            format!("{:.4}", self.tp_rate),
            format!("{:.4}", self.fp_rate),
            format!("{:.4}", self.class_error_rate),
            stat(self.position_error, true),
            stat(self.position_error, false),
            stat(self.orientation_error, true),
            stat(self.orientation_error, false),
            stat(self.axis_error, true),
            stat(self.axis_error, false),
            stat(self.directed_error, true),
            stat(self.directed_error, false),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in REPORT_FIELDS.iter().zip(self.values()) {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }
}

/// Footer lines quoting the reference profiles.
pub fn reference_footer() -> String {
    use reference::*;
    format!(
        "reference_recurrent: tp_rate {TP_RATE} fp_rate {FP_RATE} position_median {POSITION_MEDIAN} \
         orientation_median {ORIENTATION_MEDIAN} axis_median {AXIS_MEDIAN} directed_median {DIRECTED_MEDIAN}\n\
         reference_human: fp_rate {HUMAN_FP_RATE} class_error {HUMAN_CLASS_ERROR} \
         position_median {HUMAN_POSITION_MEDIAN} orientation_median {HUMAN_ORIENTATION_MEDIAN}\n"
    )
}

pub fn write_reports_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_FIELDS)?;
    for r in reports {
        w.write_record(r.values())?;
    }
    w.flush()?;
    Ok(())
}
