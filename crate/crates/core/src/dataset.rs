//! On-disk datasets: one directory per sequence holding PNG frames and an
//! optional `annotations.csv`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::annotation::{parse_annotations, split_dataset, FrameRecord, SplitMode};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imageio;

pub const ANNOTATION_FILE: &str = "annotations.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceData {
    pub name: String,
    /// One record per frame, frames numbered from 0 in file-name order.
    pub records: Vec<FrameRecord>,
    pub images: Vec<Grid<u8>>,
}

impl SequenceData {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    fn slice(&self, range: std::ops::Range<usize>) -> SequenceData {
        SequenceData {
            name: self.name.clone(),
            records: self.records[range.clone()].to_vec(),
            images: self.images[range].to_vec(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<SequenceData>,
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads one sequence directory. Annotations are joined to frames by image
/// file name; frames without rows have no annotations.
pub fn load_sequence(dir: &Path) -> Result<SequenceData> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Data(format!("{} has no directory name", dir.display())))?;
    let files = png_files(dir)?;
    let csv_path = dir.join(ANNOTATION_FILE);
    let mut by_image: HashMap<String, FrameRecord> = HashMap::new();
    if csv_path.exists() {
        for rec in parse_annotations(fs::File::open(&csv_path)?)? {
            by_image.insert(rec.image.clone(), rec);
        }
    }
    let mut records = Vec::with_capacity(files.len());
    let mut images = Vec::with_capacity(files.len());
    for (frame, path) in files.iter().enumerate() {
        let image_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let annotations = by_image.remove(&image_name).map(|r| r.annotations).unwrap_or_default();
        let img = imageio::read_gray(path)?;
        if let Some(a) = annotations.iter().find(|a| !a.in_bounds(img.width(), img.height())) {
            return Err(Error::Data(format!("{}: annotation at ({}, {}) outside the image", path.display(), a.x, a.y)));
        }
        records.push(FrameRecord { sequence: name.clone(), frame, image: image_name, annotations });
        images.push(img);
    }
    if let Some(image) = by_image.keys().min() {
        return Err(Error::Data(format!("{}: annotated image {image} not found", csv_path.display())));
    }
    Ok(SequenceData { name, records, images })
}

impl Dataset {
    /// A directory of sequence directories, or a single sequence directory.
    pub fn load(dir: &Path) -> Result<Dataset> {
        if !dir.is_dir() {
            return Err(Error::Data(format!("{} is not a directory", dir.display())));
        }
        if !png_files(dir)?.is_empty() {
            return Ok(Dataset { sequences: vec![load_sequence(dir)?] });
        }
        let mut subdirs: Vec<PathBuf> =
            fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
        subdirs.sort();
        let sequences = subdirs
            .iter()
            .map(|d| load_sequence(d))
            .filter(|s| !matches!(s, Ok(s) if s.is_empty()))
            .collect::<Result<Vec<_>>>()?;
        if sequences.is_empty() {
            return Err(Error::Data(format!("no frames under {}", dir.display())));
        }
        Ok(Dataset { sequences })
    }

    pub fn frame_count(&self) -> usize {
        self.sequences.iter().map(SequenceData::len).sum()
    }

    pub fn annotation_count(&self) -> usize {
        self.sequences.iter().flat_map(|s| &s.records).map(|r| r.annotations.len()).sum()
    }

    /// Splits every sequence into a training prefix and a test suffix.
    pub fn split_prefix(&self, train_fraction: f64) -> Result<(Dataset, Dataset)> {
        let (mut train, mut test) = (Dataset::default(), Dataset::default());
        for seq in &self.sequences {
            let split = split_dataset(&seq.records, SplitMode::SequencePrefix { train_fraction })?;
            let cut = split.train.len();
            train.sequences.push(seq.slice(0..cut));
            test.sequences.push(seq.slice(cut..seq.len()));
        }
        Ok((train, test))
    }

    /// Frame dimensions shared by all frames.
    pub fn frame_size(&self) -> Result<(usize, usize)> {
        let mut dims = self.sequences.iter().flat_map(|s| &s.images).map(|g| (g.width(), g.height()));
        let first = dims.next().ok_or_else(|| Error::Data("empty dataset".into()))?;
        if dims.any(|d| d != first) {
            return Err(Error::Data("frames differ in size".into()));
        }
        Ok(first)
    }
}
