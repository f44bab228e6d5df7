//! Epoch-based training over datasets of frame sequences.
//!
//! Frames are consumed as clips of consecutive frames. A batch holds several
//! clips advanced in lockstep, so a recurrent network can carry each clip's
//! penultimate field into its next frame. A clip that does not start a
//! sequence gets its first prior from a forward pass over the preceding
//! frame, so only true sequence starts see a zero prior. Clips are cut to a
//! random square crop that stays fixed for the whole clip.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::Annotation;
use crate::dataset::{Dataset, SequenceData};
use crate::error::{Error, Result};
use crate::grid::{Grid, Tensor};
use crate::labelgen::{self, ClassCounts, WeightMode};
use crate::net::{image_tensor, NetConfig, Network, Sample, Target};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// Three-class background / bee / abdomen segmentation.
    Segmentation,
    /// Foreground plus per-pixel heading regression.
    Orientation,
}

impl Task {
    pub fn weight_mode(self) -> WeightMode {
        match self {
            Task::Segmentation => WeightMode::PerClass,
            Task::Orientation => WeightMode::ForegroundPooled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub task: Task,
    pub recurrent: bool,
    pub epochs: usize,
    pub base_filters: usize,
    pub depth: usize,
    pub learning_rate: f64,
    /// Clips per optimizer step.
    pub batch_size: usize,
    /// Square crop side; 0 trains on whole frames.
    pub crop: usize,
    /// Consecutive frames per clip.
    pub clip_len: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            task: Task::Segmentation,
            recurrent: false,
            epochs: 18,
            base_filters: 8,
            depth: 3,
            learning_rate: 1e-3,
            batch_size: 4,
            crop: 128,
            clip_len: 1,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn net_config(&self) -> NetConfig {
        match self.task {
            Task::Segmentation => NetConfig::segmentation(self.base_filters, self.depth),
            Task::Orientation => NetConfig::orientation(self.base_filters, self.depth, self.recurrent),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 || self.clip_len == 0 {
            return Err(Error::Invalid("batch size and clip length must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!("learning rate {}", self.learning_rate)));
        }
        if self.recurrent && self.task == Task::Segmentation {
            return Err(Error::Invalid("the recurrent prior applies to orientation networks".into()));
        }
        let config = self.net_config();
        config.validate()?;
        if self.crop % config.size_multiple() != 0 {
            return Err(Error::Invalid(format!("crop {} is not a multiple of {}", self.crop, config.size_multiple())));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub steps: usize,
}

/// Per-pixel targets for one frame.
pub struct FrameLabels {
    pub target: Target<f32>,
    pub weights: Grid<f32>,
}

pub fn frame_labels(
    annotations: &[Annotation],
    width: usize,
    height: usize,
    counts: &ClassCounts,
    task: Task,
) -> Result<FrameLabels> {
    let target = match task {
        Task::Segmentation => Target::Classes(labelgen::rasterize_class_map(annotations, width, height)),
        Task::Orientation => Target::Angles(labelgen::rasterize_angle_map(annotations, width, height)),
    };
    let weights = labelgen::build_weight_map(annotations, counts, task.weight_mode(), width, height)?;
    Ok(FrameLabels { target, weights })
}

/// Class tallies of the rasterized labels of every frame.
pub fn dataset_class_counts(data: &Dataset) -> Result<ClassCounts> {
    let mut counts = ClassCounts::default();
    for seq in &data.sequences {
        for (rec, img) in seq.records.iter().zip(&seq.images) {
            counts.add_map(&labelgen::rasterize_class_map(&rec.annotations, img.width(), img.height()));
        }
    }
    if counts.background == 0 || counts.foreground() == 0 {
        return Err(Error::Data(format!("training labels are degenerate: {counts:?}")));
    }
    Ok(counts)
}

fn crop_grid<V: Copy>(g: &Grid<V>, x0: usize, y0: usize, w: usize, h: usize) -> Grid<V> {
    let mut data = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        data.extend_from_slice(&g.data()[y * g.width() + x0..y * g.width() + x0 + w]);
    }
    Grid::from_vec(w, h, data).expect("crop inside grid")
}

/// One frame (or the window `origin`/`size` of it) as a training sample.
pub fn make_sample(
    seq: &SequenceData,
    frame: usize,
    window: Option<(usize, usize, usize)>,
    counts: &ClassCounts,
    task: Task,
    prior: Option<Tensor<f32>>,
) -> Result<Sample<f32>> {
    let img = &seq.images[frame];
    let labels = frame_labels(&seq.records[frame].annotations, img.width(), img.height(), counts, task)?;
    let (x0, y0, side_w, side_h) = match window {
        Some((x0, y0, side)) => (x0, y0, side, side),
        None => (0, 0, img.width(), img.height()),
    };
    let image = image_tensor(&crop_grid(img, x0, y0, side_w, side_h));
    let target = match labels.target {
        Target::Classes(c) => Target::Classes(crop_grid(&c, x0, y0, side_w, side_h)),
        Target::Angles(a) => Target::Angles(crop_grid(&a, x0, y0, side_w, side_h)),
    };
    Ok(Sample { image, target, weights: crop_grid(&labels.weights, x0, y0, side_w, side_h), prior })
}

fn window_image(seq: &SequenceData, frame: usize, window: Option<(usize, usize, usize)>) -> Tensor<f32> {
    let img = &seq.images[frame];
    match window {
        Some((x0, y0, side)) => image_tensor(&crop_grid(img, x0, y0, side, side)),
        None => image_tensor(img),
    }
}

#[derive(Clone, Copy, Debug)]
struct Clip {
    sequence: usize,
    start: usize,
    len: usize,
    window: Option<(usize, usize, usize)>,
}

fn epoch_clips(data: &Dataset, opts: &TrainOptions, rng: &mut ChaCha8Rng) -> Vec<Clip> {
    let mut clips = Vec::new();
    for (si, seq) in data.sequences.iter().enumerate() {
        let mut start = 0;
        while start < seq.len() {
            let len = opts.clip_len.min(seq.len() - start);
            let img = &seq.images[start];
            let window = (opts.crop > 0 && (opts.crop < img.width() || opts.crop < img.height())).then(|| {
                let x0 = rng.random_range(0..=img.width().saturating_sub(opts.crop));
                let y0 = rng.random_range(0..=img.height().saturating_sub(opts.crop));
                (x0, y0, opts.crop)
            });
            clips.push(Clip { sequence: si, start, len, window });
            start += len;
        }
    }
    clips.shuffle(rng);
    clips
}

fn check_sizes(data: &Dataset, opts: &TrainOptions) -> Result<()> {
    let m = opts.net_config().size_multiple();
    for seq in &data.sequences {
        for img in &seq.images {
            let cropped = opts.crop > 0 && opts.crop <= img.width() && opts.crop <= img.height();
            if opts.crop > 0 && !cropped && (opts.crop < img.width() || opts.crop < img.height()) {
                return Err(Error::Data(format!(
                    "crop {} does not fit a {}x{} frame",
                    opts.crop,
                    img.width(),
                    img.height()
                )));
            }
            if !cropped && (img.width() % m != 0 || img.height() % m != 0) {
                return Err(Error::Data(format!("{}x{} frames are not multiples of {m}", img.width(), img.height())));
            }
        }
    }
    Ok(())
}

/// Mean per-frame loss over whole test frames, chaining priors within each
/// sequence for recurrent networks.
pub fn dataset_loss(net: &Network<f32>, data: &Dataset, counts: &ClassCounts, task: Task) -> Result<Option<f64>> {
    let (mut total, mut n) = (0.0, 0usize);
    for seq in &data.sequences {
        let mut prior = None;
        for frame in 0..seq.len() {
            let sample = make_sample(seq, frame, None, counts, task, prior.take())?;
            let (loss, penultimate) = net.sample_loss(&sample)?;
            if net.config().recurrent {
                prior = Some(penultimate);
            }
            total += loss as f64;
            n += 1;
        }
    }
    Ok((n > 0).then(|| total / n as f64))
}

/// Trains a fresh network. `on_epoch` sees the network after every epoch
/// and may abort training by returning an error.
pub fn train(
    train_data: &Dataset,
    test_data: &Dataset,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochStats, &Network<f32>) -> Result<()>,
) -> Result<Network<f32>> {
    opts.validate()?;
    check_sizes(train_data, opts)?;
    let counts = dataset_class_counts(train_data)?;
    let mut net = Network::<f32>::new(opts.net_config(), opts.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(1);
    let lr = opts.learning_rate as f32;
    for epoch in 1..=opts.epochs {
        let clips = epoch_clips(train_data, opts, &mut rng);
        let (mut loss_sum, mut steps) = (0.0, 0usize);
        for group in clips.chunks(opts.batch_size) {
            let longest = group.iter().map(|c| c.len).max().unwrap_or(0);
            let mut priors: Vec<Option<Tensor<f32>>> = group
                .iter()
                .map(|c| match (opts.recurrent, c.start) {
                    (true, 1..) => {
                        let seq = &train_data.sequences[c.sequence];
                        Ok(Some(net.forward(&window_image(seq, c.start - 1, c.window), None)?.penultimate))
                    }
                    _ => Ok(None),
                })
                .collect::<Result<_>>()?;
            for t in 0..longest {
                let live: Vec<usize> = (0..group.len()).filter(|&i| t < group[i].len).collect();
                let batch = live
                    .iter()
                    .map(|&i| {
                        let c = group[i];
                        let seq = &train_data.sequences[c.sequence];
                        make_sample(seq, c.start + t, c.window, &counts, opts.task, priors[i].take())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let out = net.train_step(&batch, lr)?;
                if !out.loss.is_finite() {
                    return Err(Error::Numeric(format!("loss diverged in epoch {epoch}")));
                }
                loss_sum += out.loss as f64;
                steps += 1;
                if opts.recurrent {
                    for (&i, p) in live.iter().zip(out.penultimates) {
                        priors[i] = Some(p);
                    }
                }
            }
        }
        let test_loss = dataset_loss(&net, test_data, &counts, opts.task)?;
        let stats = EpochStats { epoch, train_loss: loss_sum / steps.max(1) as f64, test_loss, steps };
        log::info!("epoch {epoch}: train {:.5} test {:?}", stats.train_loss, stats.test_loss);
        on_epoch(&stats, &net)?;
    }
    Ok(net)
}
