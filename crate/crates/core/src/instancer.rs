//! Per-pixel predictions to discrete detections.
//!
//! Foreground pixels are grouped into 8-connected regions; regions outside
//! the accepted area range are dropped; each survivor yields a centroid, a
//! class vote, a principal-axis angle and (for orientation networks) a
//! quantile readout of the predicted heading that orients the axis.

use crate::annotation::Kind;
use crate::error::{Error, Result};
use crate::geom::{orientation_distance, AxisDeg, OrientationDeg};
use crate::grid::{Grid, Tensor};
use crate::losses::{ANGLE_CHANNEL, FG_CHANNEL};
use crate::scalar::Scalar;

/// One 8-connected foreground component, pixels in raster order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub pixels: Vec<(u32, u32)>,
}

impl Region {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// One extracted instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub x: f64,
    pub y: f64,
    pub kind: Kind,
    pub axis: AxisDeg,
    /// Raw heading readout (zero when the network predicts no angle).
    pub angle: OrientationDeg,
    /// The axis oriented towards `angle`.
    pub directed: OrientationDeg,
    pub area: usize,
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let p = self.parent[i as usize];
            self.parent[i as usize] = self.parent[p as usize];
            i = p;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        // smaller label wins so roots stay at the earliest provisional label
        if ra < rb {
            self.parent[rb as usize] = ra;
        } else if rb < ra {
            self.parent[ra as usize] = rb;
        }
    }
}

/// Maximal 8-connected components of `mask`, ordered by their first pixel
/// in raster order (smallest y, then smallest x on that row).
pub fn connected_components(mask: &Grid<bool>) -> Vec<Region> {
    let (w, h) = (mask.width(), mask.height());
    const NONE: u32 = u32::MAX;
    let mut labels = vec![NONE; w * h];
    let mut sets = DisjointSet { parent: Vec::new() };
    for y in 0..h {
        for x in 0..w {
            if !*mask.get(x, y) {
                continue;
            }
            let mut current = NONE;
            let visit = |nx: usize, ny: usize, current: &mut u32, sets: &mut DisjointSet| {
                let l = labels[ny * w + nx];
                if l != NONE {
                    if *current == NONE {
                        *current = l;
                    } else {
                        sets.union(*current, l);
                    }
                }
            };
            if x > 0 {
                visit(x - 1, y, &mut current, &mut sets);
            }
            if y > 0 {
                if x > 0 {
                    visit(x - 1, y - 1, &mut current, &mut sets);
                }
                visit(x, y - 1, &mut current, &mut sets);
                if x + 1 < w {
                    visit(x + 1, y - 1, &mut current, &mut sets);
                }
            }
            if current == NONE {
                current = sets.parent.len() as u32;
                sets.parent.push(current);
            }
            labels[y * w + x] = current;
        }
    }
    let mut region_of_root: Vec<u32> = vec![NONE; sets.parent.len()];
    let mut regions: Vec<Region> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == NONE {
                continue;
            }
            let root = sets.find(l) as usize;
            if region_of_root[root] == NONE {
                region_of_root[root] = regions.len() as u32;
                regions.push(Region { pixels: Vec::new() });
            }
            regions[region_of_root[root] as usize].pixels.push((x as u32, y as u32));
        }
    }
    regions
}

/// Mean of the pixel centers `(i + 0.5, j + 0.5)`.
pub fn region_centroid(region: &Region) -> Result<(f64, f64)> {
    if region.pixels.is_empty() {
        return Err(Error::Invalid("centroid of an empty region".into()));
    }
    let n = region.area() as f64;
    let (sx, sy) = region.pixels.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
    Ok((sx / n + 0.5, sy / n + 0.5))
}

/// Covariance eigenvalue gap below which the axis is reported as 0.
const ISOTROPY_GAP: f64 = 1e-9;

/// Undirected angle of the first principal component of the pixel
/// coordinates, clockwise from image-up.
pub fn region_axis(region: &Region) -> Result<AxisDeg> {
    if region.area() < 2 {
        return Err(Error::Invalid(format!("axis of a region with {} pixels", region.area())));
    }
    let (cx, cy) = region_centroid(region)?;
    let n = region.area() as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in &region.pixels {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    let gap = ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt();
    if gap < ISOTROPY_GAP {
        return Ok(AxisDeg::zero());
    }
    // major-axis angle from +x in image coordinates
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (dx, dy) = (theta.cos(), theta.sin());
    AxisDeg::new(dx.atan2(-dy).to_degrees())
}

/// The value at index `floor((1 - q) * (n - 1))` of the region's sorted
/// predictions, normalized into `[0, 360)`.
pub fn region_angle_quantile<T: Scalar>(region: &Region, angles: &Grid<T>, q: f64) -> Result<OrientationDeg> {
    if region.pixels.is_empty() {
        return Err(Error::Invalid("quantile of an empty region".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Invalid(format!("quantile {q} outside (0, 1)")));
    }
    let mut values: Vec<f64> = region.pixels.iter().map(|&(x, y)| angles.get(x as usize, y as usize).as_f64()).collect();
    values.sort_by(f64::total_cmp);
    let idx = ((1.0 - q) * (values.len() - 1) as f64).floor() as usize;
    OrientationDeg::new(values[idx])
}

/// Whichever end of `axis` lies closer to `angle`; ties keep `axis`.
pub fn directed_axis(axis: AxisDeg, angle: OrientationDeg) -> OrientationDeg {
    let forward = axis.as_orientation();
    let backward = axis.flipped();
    if orientation_distance(backward, angle) < orientation_distance(forward, angle) {
        backward
    } else {
        forward
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputMode {
    /// 3 channels: background, bee, abdomen scores.
    Segmentation,
    /// 2 channels: foreground logit, heading in degrees.
    Orientation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractParams {
    pub min_area: usize,
    pub max_area: usize,
    /// Upper-tail fraction for the heading readout.
    pub quantile: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self { min_area: 100, max_area: 6000, quantile: 0.01 }
    }
}

/// Foreground mask and, in segmentation mode, the per-pixel winning class.
fn foreground<T: Scalar>(prediction: &Tensor<T>, mode: OutputMode) -> Result<(Grid<bool>, Option<Grid<u8>>)> {
    let (w, h) = (prediction.width, prediction.height);
    match mode {
        OutputMode::Segmentation => {
            if prediction.channels != 3 {
                return Err(Error::Shape(format!("segmentation needs 3 channels, got {}", prediction.channels)));
            }
            let plane = prediction.plane();
            let classes: Vec<u8> = (0..plane)
                .map(|p| {
                    let mut best = 0;
                    for c in 1..3 {
                        if prediction.data[c * plane + p] > prediction.data[best * plane + p] {
                            best = c;
                        }
                    }
                    best as u8
                })
                .collect();
            let mask = classes.iter().map(|&c| c != 0).collect();
            Ok((Grid::from_vec(w, h, mask)?, Some(Grid::from_vec(w, h, classes)?)))
        }
        OutputMode::Orientation => {
            if prediction.channels != 2 {
                return Err(Error::Shape(format!("orientation needs 2 channels, got {}", prediction.channels)));
            }
            // sigmoid(z) > 0.5 exactly when z > 0
            let mask = prediction.channel(FG_CHANNEL).iter().map(|&z| z > T::zero()).collect();
            Ok((Grid::from_vec(w, h, mask)?, None))
        }
    }
}

/// Extracts detections from one frame's network output.
pub fn extract_detections<T: Scalar>(
    prediction: &Tensor<T>,
    mode: OutputMode,
    params: &ExtractParams,
) -> Result<Vec<Detection>> {
    let (mask, classes) = foreground(prediction, mode)?;
    let angles = match mode {
        OutputMode::Orientation => Some(prediction.channel_grid(ANGLE_CHANNEL)),
        OutputMode::Segmentation => None,
    };
    let mut out = Vec::new();
    for region in connected_components(&mask) {
        if region.area() < params.min_area || region.area() > params.max_area {
            continue;
        }
        let (x, y) = region_centroid(&region)?;
        let axis = region_axis(&region)?;
        let kind = match &classes {
            Some(classes) => {
                let abdomen =
                    region.pixels.iter().filter(|&&(px, py)| *classes.get(px as usize, py as usize) == 2).count();
                if 2 * abdomen > region.area() {
                    Kind::Abdomen
                } else {
                    Kind::FullBee
                }
            }
            None => Kind::FullBee,
        };
        let angle = match &angles {
            Some(angles) => region_angle_quantile(&region, angles, params.quantile)?,
            None => OrientationDeg::zero(),
        };
        out.push(Detection { x, y, kind, axis, angle, directed: directed_axis(axis, angle), area: region.area() });
    }
    Ok(out)
}
