//! Annotation and detection records, their CSV formats, frame tiling and
//! dataset splits.
//!
//! Annotation CSV header: `sequence,frame,image,x,y,kind,angle_deg`.
//! Detection CSV header: `sequence,frame,x,y,kind,axis_deg,angle_deg,directed_deg,area_px`.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{AxisDeg, OrientationDeg};
use crate::instancer::Detection;

pub const ANNOTATION_HEADER: [&str; 7] = ["sequence", "frame", "image", "x", "y", "kind", "angle_deg"];
pub const DETECTION_HEADER: [&str; 9] =
    ["sequence", "frame", "x", "y", "kind", "axis_deg", "angle_deg", "directed_deg", "area_px"];

/// Label type: the whole body is visible, or only the abdomen of an
/// individual sitting inside a comb cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    FullBee = 1,
    Abdomen = 2,
}

impl Kind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Kind> {
        match code {
            1 => Some(Kind::FullBee),
            2 => Some(Kind::Abdomen),
            _ => None,
        }
    }
}

/// One labeled individual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Annotation {
    pub x: f64,
    pub y: f64,
    pub kind: Kind,
    /// Always zero for [`Kind::Abdomen`].
    pub angle: OrientationDeg,
}

impl Annotation {
    pub fn full_bee(x: f64, y: f64, angle_deg: f64) -> Result<Self> {
        Ok(Self { x, y, kind: Kind::FullBee, angle: OrientationDeg::new(angle_deg)? })
    }

    pub fn abdomen(x: f64, y: f64) -> Self {
        Self { x, y, kind: Kind::Abdomen, angle: OrientationDeg::zero() }
    }

    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x < width as f64 && self.y < height as f64
    }
}

/// All annotations of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub sequence: String,
    pub frame: usize,
    pub image: String,
    pub annotations: Vec<Annotation>,
}

/// Detections extracted from one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameDetections {
    pub sequence: String,
    pub frame: usize,
    pub detections: Vec<Detection>,
}

fn field<'r>(rec: &'r csv::StringRecord, i: usize, row: usize) -> Result<&'r str> {
    rec.get(i).map(str::trim).ok_or_else(|| Error::Parse { row, message: format!("missing column {i}") })
}

fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, row: usize, name: &str) -> Result<T> {
    let raw = field(rec, i, row)?;
    raw.parse()
        .map_err(|_| Error::Parse { row, message: format!("{name}: not a number: {raw:?}") })
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(|e| Error::Parse { row: 1, message: e.to_string() })?;
    if header.iter().map(str::trim).ne(want.iter().copied()) {
        return Err(Error::Parse { row: 1, message: format!("expected header {}", want.join(",")) });
    }
    Ok(())
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input)
}

/// Parses an annotation CSV. Rows are grouped into frames by
/// `(sequence, frame)` in order of first appearance.
pub fn parse_annotations<R: Read>(input: R) -> Result<Vec<FrameRecord>> {
    let mut rd = reader(input);
    check_header(&mut rd, &ANNOTATION_HEADER)?;
    let mut records: Vec<FrameRecord> = Vec::new();
    let mut index: HashMap<(String, usize), usize> = HashMap::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let sequence = field(&rec, 0, row)?.to_string();
        let frame: usize = num(&rec, 1, row, "frame")?;
        let image = field(&rec, 2, row)?.to_string();
        let x: f64 = num(&rec, 3, row, "x")?;
        let y: f64 = num(&rec, 4, row, "y")?;
        let code: u8 = num(&rec, 5, row, "kind")?;
        let raw_angle: f64 = num(&rec, 6, row, "angle_deg")?;
        if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
            return Err(Error::Parse { row, message: format!("position ({x}, {y}) outside the image") });
        }
        let kind = Kind::from_code(code)
            .ok_or_else(|| Error::Parse { row, message: format!("kind must be 1 or 2, got {code}") })?;
        let angle = OrientationDeg::new(raw_angle)
            .map_err(|_| Error::Parse { row, message: format!("angle {raw_angle} is not finite") })?;
        if angle.value() != raw_angle {
            log::warn!("row {row}: angle {raw_angle} normalized to {}", angle.value());
        }
        if kind == Kind::Abdomen && angle.value() != 0.0 {
            return Err(Error::Parse { row, message: "abdomen angle must be 0".into() });
        }
        let slot = *index.entry((sequence.clone(), frame)).or_insert_with(|| {
            records.push(FrameRecord { sequence, frame, image: image.clone(), annotations: Vec::new() });
            records.len() - 1
        });
        if records[slot].image != image {
            return Err(Error::Parse {
                row,
                message: format!("frame {frame} already bound to image {}", records[slot].image),
            });
        }
        records[slot].annotations.push(Annotation { x, y, kind, angle });
    }
    Ok(records)
}

pub fn parse_annotations_str(text: &str) -> Result<Vec<FrameRecord>> {
    parse_annotations(text.as_bytes())
}

/// Writes records as annotation CSV. Frames without annotations produce no rows.
pub fn write_annotations<W: Write>(records: &[FrameRecord], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(ANNOTATION_HEADER)?;
    for rec in records {
        for a in &rec.annotations {
            wr.write_record([
                rec.sequence.clone(),
                rec.frame.to_string(),
                rec.image.clone(),
                format!("{:.3}", a.x),
                format!("{:.3}", a.y),
                a.kind.code().to_string(),
                format!("{:.2}", a.angle.value()),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn annotations_to_string(records: &[FrameRecord]) -> String {
    let mut buf = Vec::new();
    write_annotations(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Writes detections as detection CSV.
pub fn write_detections<W: Write>(frames: &[FrameDetections], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(DETECTION_HEADER)?;
    for f in frames {
        for d in &f.detections {
            wr.write_record([
                f.sequence.clone(),
                f.frame.to_string(),
                format!("{:.4}", d.x),
                format!("{:.4}", d.y),
                d.kind.code().to_string(),
                format!("{:.4}", d.axis.value()),
                format!("{:.4}", d.angle.value()),
                format!("{:.4}", d.directed.value()),
                d.area.to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Parses a detection CSV, grouping rows by `(sequence, frame)` in order of
/// first appearance.
pub fn parse_detections<R: Read>(input: R) -> Result<Vec<FrameDetections>> {
    let mut rd = reader(input);
    check_header(&mut rd, &DETECTION_HEADER)?;
    let mut frames: Vec<FrameDetections> = Vec::new();
    let mut index: HashMap<(String, usize), usize> = HashMap::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let sequence = field(&rec, 0, row)?.to_string();
        let frame: usize = num(&rec, 1, row, "frame")?;
        let code: u8 = num(&rec, 4, row, "kind")?;
        let kind = Kind::from_code(code)
            .ok_or_else(|| Error::Parse { row, message: format!("kind must be 1 or 2, got {code}") })?;
        let angle_of = |v: f64| Error::Parse { row, message: format!("angle {v} is not finite") };
        let axis: f64 = num(&rec, 5, row, "axis_deg")?;
        let angle: f64 = num(&rec, 6, row, "angle_deg")?;
        let directed: f64 = num(&rec, 7, row, "directed_deg")?;
        let det = Detection {
            x: num(&rec, 2, row, "x")?,
            y: num(&rec, 3, row, "y")?,
            kind,
            axis: AxisDeg::new(axis).map_err(|_| angle_of(axis))?,
            angle: OrientationDeg::new(angle).map_err(|_| angle_of(angle))?,
            directed: OrientationDeg::new(directed).map_err(|_| angle_of(directed))?,
            area: num(&rec, 8, row, "area_px")?,
        };
        let slot = *index.entry((sequence.clone(), frame)).or_insert_with(|| {
            frames.push(FrameDetections { sequence, frame, detections: Vec::new() });
            frames.len() - 1
        });
        frames[slot].detections.push(det);
    }
    Ok(frames)
}

/// One tile cut from a frame. `record` holds tile-local coordinates; adding
/// `origin_x`/`origin_y` maps them back to the frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Tile {
    pub record: FrameRecord,
    pub col: usize,
    pub row: usize,
    pub origin_x: usize,
    pub origin_y: usize,
    pub width: usize,
    pub height: usize,
}

fn tile_origins(size: usize, tile: usize, stride: usize) -> Vec<(usize, usize)> {
    if size <= tile {
        return vec![(0, size)];
    }
    let count = (size - tile).div_ceil(stride) + 1;
    (0..count)
        .map(|k| {
            let start = k * stride;
            (start, tile.min(size - start))
        })
        .collect()
}

/// Cuts a `width x height` frame into overlapping tiles on a grid with
/// stride `tile - overlap`. Tiles at the right/bottom edge are truncated.
/// Each annotation lands in every tile containing its center.
pub fn tile_frame(
    record: &FrameRecord,
    width: usize,
    height: usize,
    tile: usize,
    overlap: usize,
) -> Result<Vec<Tile>> {
    if tile == 0 || overlap >= tile {
        return Err(Error::Invalid(format!("tile {tile} with overlap {overlap}")));
    }
    let stride = tile - overlap;
    let xs = tile_origins(width, tile, stride);
    let ys = tile_origins(height, tile, stride);
    let mut tiles = Vec::with_capacity(xs.len() * ys.len());
    for (row, &(oy, th)) in ys.iter().enumerate() {
        for (col, &(ox, tw)) in xs.iter().enumerate() {
            let (fx, fy) = (ox as f64, oy as f64);
            let annotations = record
                .annotations
                .iter()
                .filter(|a| a.x >= fx && a.x < fx + tw as f64 && a.y >= fy && a.y < fy + th as f64)
                .map(|a| Annotation { x: a.x - fx, y: a.y - fy, ..*a })
                .collect();
            tiles.push(Tile {
                record: FrameRecord {
                    sequence: record.sequence.clone(),
                    frame: record.frame,
                    image: record.image.clone(),
                    annotations,
                },
                col,
                row,
                origin_x: ox,
                origin_y: oy,
                width: tw,
                height: th,
            });
        }
    }
    Ok(tiles)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitMode {
    /// `test_count` frames drawn uniformly without replacement.
    RandomFrames { seed: u64, test_count: usize },
    /// Per sequence, the first `floor(train_fraction * len)` frames train.
    SequencePrefix { train_fraction: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<FrameRecord>,
    pub test: Vec<FrameRecord>,
    pub mode: SplitMode,
}

pub fn split_dataset(records: &[FrameRecord], mode: SplitMode) -> Result<DatasetSplit> {
    let (train, test) = match mode {
        SplitMode::RandomFrames { seed, test_count } => {
            if test_count >= records.len() {
                return Err(Error::Invalid(format!(
                    "test count {test_count} leaves no training frames out of {}",
                    records.len()
                )));
            }
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut is_test = vec![false; records.len()];
            for &i in &order[..test_count] {
                is_test[i] = true;
            }
            let (test, train): (Vec<_>, Vec<_>) =
                records.iter().cloned().zip(is_test).partition(|(_, t)| *t);
            (train.into_iter().map(|(r, _)| r).collect(), test.into_iter().map(|(r, _)| r).collect())
        }
        SplitMode::SequencePrefix { train_fraction } => {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(Error::Invalid(format!(
                    "train fraction {train_fraction} must lie strictly between 0 and 1"
                )));
            }
            let mut order: Vec<&str> = Vec::new();
            let mut by_seq: HashMap<&str, Vec<&FrameRecord>> = HashMap::new();
            for r in records {
                by_seq
                    .entry(&r.sequence)
                    .or_insert_with(|| {
                        order.push(&r.sequence);
                        Vec::new()
                    })
                    .push(r);
            }
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for seq in order {
                let mut frames = by_seq.remove(seq).unwrap_or_default();
                frames.sort_by_key(|r| r.frame);
                // absorb representation error such as 0.29 * 100 = 28.999...
                let cut = (train_fraction * frames.len() as f64 + 1e-9).floor() as usize;
                if cut == frames.len() {
                    return Err(Error::Invalid(format!("sequence {seq} has an empty test part")));
                }
                train.extend(frames[..cut].iter().map(|r| (*r).clone()));
                test.extend(frames[cut..].iter().map(|r| (*r).clone()));
            }
            (train, test)
        }
    };
    Ok(DatasetSplit { train, test, mode })
}
