//! Rasterization of annotations into training targets.
//!
//! Full bodies become filled ellipses (semi-axes 20 across, 35 along the
//! heading), abdomens filled discs of radius 20. A pixel `(i, j)` belongs to
//! a footprint when its center `(i + 0.5, j + 0.5)` does. Where footprints
//! overlap, the pixel goes to the annotation with the nearest center.

use crate::annotation::{Annotation, Kind};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

pub const BODY_SEMI_MINOR: f64 = 20.0;
pub const BODY_SEMI_MAJOR: f64 = 35.0;
pub const ABDOMEN_RADIUS: f64 = 20.0;
/// Angle map value for background pixels.
pub const BACKGROUND_ANGLE: f64 = -1.0;

pub const CLASS_BACKGROUND: u8 = 0;
pub const CLASS_BEE: u8 = 1;
pub const CLASS_ABDOMEN: u8 = 2;

/// Per-pixel label in `{0, 1, 2}`.
pub type ClassMap = Grid<u8>;
/// Per-pixel heading in degrees, or [`BACKGROUND_ANGLE`].
pub type AngleMap<T = f32> = Grid<T>;
/// Per-pixel loss multiplier, at least 1.
pub type WeightMap<T = f32> = Grid<T>;

pub fn class_of(kind: Kind) -> u8 {
    match kind {
        Kind::FullBee => CLASS_BEE,
        Kind::Abdomen => CLASS_ABDOMEN,
    }
}

/// Footprint semi-axes `(along heading, across heading)`.
fn semi_axes(kind: Kind) -> (f64, f64) {
    match kind {
        Kind::FullBee => (BODY_SEMI_MAJOR, BODY_SEMI_MINOR),
        Kind::Abdomen => (ABDOMEN_RADIUS, ABDOMEN_RADIUS),
    }
}

/// Offset of a point from the annotation center in the body frame.
fn body_coords(a: &Annotation, px: f64, py: f64) -> (f64, f64) {
    let (ux, uy) = a.angle.unit_vector();
    let (dx, dy) = (px - a.x, py - a.y);
    // across-axis direction is the heading rotated by +90 degrees
    (dx * ux + dy * uy, dx * -uy + dy * ux)
}

pub fn footprint_contains(a: &Annotation, px: f64, py: f64) -> bool {
    let (along, across) = body_coords(a, px, py);
    let (ra, rc) = semi_axes(a.kind);
    (along / ra).powi(2) + (across / rc).powi(2) <= 1.0
}

fn pixel_range(center: f64, reach: f64, size: usize) -> std::ops::Range<usize> {
    let lo = (center - reach - 1.0).floor().max(0.0) as usize;
    let hi = ((center + reach + 1.0).ceil().max(0.0) as usize).min(size);
    lo.min(hi)..hi
}

/// Total order on annotations used to break exact distance ties, so the
/// result never depends on input order.
fn tie_key(a: &Annotation) -> (f64, f64, u8, f64) {
    (a.x, a.y, a.kind.code(), a.angle.value())
}

fn tie_less(a: &Annotation, b: &Annotation) -> bool {
    tie_key(a).partial_cmp(&tie_key(b)) == Some(std::cmp::Ordering::Less)
}

/// For every pixel, the index of the annotation owning it.
fn owners(annotations: &[Annotation], width: usize, height: usize) -> Grid<Option<usize>> {
    let mut owner: Grid<Option<usize>> = Grid::filled(width, height, None);
    let mut best = vec![f64::INFINITY; width * height];
    for (k, a) in annotations.iter().enumerate() {
        let reach = semi_axes(a.kind).0;
        for j in pixel_range(a.y, reach, height) {
            for i in pixel_range(a.x, reach, width) {
                let (px, py) = (i as f64 + 0.5, j as f64 + 0.5);
                if !footprint_contains(a, px, py) {
                    continue;
                }
                let d2 = (px - a.x).powi(2) + (py - a.y).powi(2);
                let slot = j * width + i;
                let take = match owner.data()[slot] {
                    None => true,
                    Some(prev) => {
                        d2 < best[slot] || (d2 == best[slot] && tie_less(a, &annotations[prev]))
                    }
                };
                if take {
                    best[slot] = d2;
                    *owner.get_mut(i, j) = Some(k);
                }
            }
        }
    }
    owner
}

pub fn rasterize_class_map(annotations: &[Annotation], width: usize, height: usize) -> ClassMap {
    owners(annotations, width, height).map(|o| o.map_or(CLASS_BACKGROUND, |k| class_of(annotations[k].kind)))
}

pub fn rasterize_angle_map<T: Scalar>(
    annotations: &[Annotation],
    width: usize,
    height: usize,
) -> AngleMap<T> {
    owners(annotations, width, height).map(|o| match o {
        None => T::of(BACKGROUND_ANGLE),
        Some(k) => match annotations[*k].kind {
            Kind::FullBee => T::of(annotations[*k].angle.value()),
            Kind::Abdomen => T::zero(),
        },
    })
}

/// Pixel tallies per class over a training set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub background: u64,
    pub bee: u64,
    pub abdomen: u64,
}

impl ClassCounts {
    pub fn foreground(&self) -> u64 {
        self.bee + self.abdomen
    }

    pub fn add_map(&mut self, map: &ClassMap) {
        for &v in map.data() {
            match v {
                CLASS_BEE => self.bee += 1,
                CLASS_ABDOMEN => self.abdomen += 1,
                _ => self.background += 1,
            }
        }
    }

    pub fn merge(self, other: ClassCounts) -> ClassCounts {
        ClassCounts {
            background: self.background + other.background,
            bee: self.bee + other.bee,
            abdomen: self.abdomen + other.abdomen,
        }
    }
}

/// Exact class tallies over `maps`. Fails when there is no background or no
/// foreground at all; a single missing foreground class is only reported
/// once weights for that class are requested.
pub fn compute_class_counts<'a>(maps: impl IntoIterator<Item = &'a ClassMap>) -> Result<ClassCounts> {
    let mut counts = ClassCounts::default();
    let mut any = false;
    for m in maps {
        counts.add_map(m);
        any = true;
    }
    if !any {
        return Err(Error::Data("class counts over an empty dataset".into()));
    }
    if counts.background == 0 || counts.foreground() == 0 {
        return Err(Error::Data(format!("degenerate class counts {counts:?}")));
    }
    Ok(counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    /// Peak = background / pixels of the annotation's own class.
    PerClass,
    /// Peak = background / all foreground pixels.
    ForegroundPooled,
}

/// Peak weight for an annotation of `kind`.
pub fn peak_scale(counts: &ClassCounts, kind: Kind, mode: WeightMode) -> Result<f64> {
    let denom = match mode {
        WeightMode::ForegroundPooled => counts.foreground(),
        WeightMode::PerClass => match kind {
            Kind::FullBee => counts.bee,
            Kind::Abdomen => counts.abdomen,
        },
    };
    if denom == 0 || counts.background == 0 {
        return Err(Error::Data(format!("no pixels of class {kind:?} to weight against")));
    }
    Ok(counts.background as f64 / denom as f64)
}

/// Gaussian standard deviation per footprint axis, as a fraction of the semi-axis.
const SIGMA_PER_SEMI_AXIS: f64 = 0.5;
/// Gaussians are evaluated out to this many standard deviations.
const SIGMA_REACH: f64 = 6.0;

/// Class-imbalance weights: 1 on background, and for each annotation an
/// anisotropic Gaussian aligned with its footprint (sigma = semi-axis / 2)
/// whose peak is the imbalance ratio. Overlapping Gaussians combine by max.
pub fn build_weight_map<T: Scalar>(
    annotations: &[Annotation],
    counts: &ClassCounts,
    mode: WeightMode,
    width: usize,
    height: usize,
) -> Result<WeightMap<T>> {
    let mut field = vec![1.0f64; width * height];
    for a in annotations {
        let scale = peak_scale(counts, a.kind, mode)?;
        let (ra, rc) = semi_axes(a.kind);
        let (sa, sc) = (ra * SIGMA_PER_SEMI_AXIS, rc * SIGMA_PER_SEMI_AXIS);
        let reach = SIGMA_REACH * sa.max(sc);
        for j in pixel_range(a.y, reach, height) {
            for i in pixel_range(a.x, reach, width) {
                let (along, across) = body_coords(a, i as f64 + 0.5, j as f64 + 0.5);
                let q = (along / sa).powi(2) + (across / sc).powi(2);
                if q > SIGMA_REACH * SIGMA_REACH {
                    continue;
                }
                let v = scale * (-0.5 * q).exp();
                let slot = &mut field[j * width + i];
                if v > *slot {
                    *slot = v;
                }
            }
        }
    }
    Grid::from_vec(width, height, field.into_iter().map(T::of).collect())
}
