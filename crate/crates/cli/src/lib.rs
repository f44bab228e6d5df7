//! Command-line pipeline: `simulate`, `rasterize`, `train`, `infer`,
//! `track`, `eval` and `report`.
//!
//! Every command writes a `run_manifest.json` next to its outputs. Passing
//! that file back with `--manifest` replays the run.
//!
//! Exit codes: 0 success, 2 usage, 3 numeric failure, 4 data failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use combtrack::annotation::{parse_detections, write_detections, FrameDetections};
use combtrack::dataset::Dataset;
use combtrack::evaluator::{self, match_detections, Matching, MetricsReport, Variant, MATCH_RADIUS};
use combtrack::imageio;
use combtrack::inference::detect_sequence;
use combtrack::instancer::{Detection, ExtractParams};
use combtrack::labelgen::{self, WeightMode};
use combtrack::net::{load_checkpoint, save_checkpoint};
use combtrack::synth::{self, Background, SynthConfig};
use combtrack::tracker::{self, LinkParams};
use combtrack::training::{self, Task, TrainOptions};
use combtrack::{Error, Network};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_DATA: i32 = 4;

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const LOSS_CURVE: &str = "loss_curve.csv";
pub const FINAL_CHECKPOINT: &str = "model.ckpt";
pub const DETECTIONS: &str = "detections.csv";
pub const TRACKS: &str = "tracks.csv";
pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";
pub const FP_HISTOGRAM: &str = "fp_histogram.csv";

#[derive(Parser, Debug, Serialize)]
#[command(name = "combtrack", version, about = "Detect, orient and track densely packed bees in video")]
pub struct Cli {
    /// Random seed for simulation, initialization and sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replay the command recorded in a run manifest.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Render synthetic sequences with ground truth.
    Simulate(SimulateArgs),
    /// Write class, angle and weight maps of a dataset as PNGs.
    Rasterize(RasterizeArgs),
    /// Train a segmentation or orientation network.
    Train(TrainArgs),
    /// Run a checkpoint over a dataset and write detections.
    Infer(InferArgs),
    /// Link detections into trajectories.
    Track(TrackArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Tabulate the reports of several eval runs.
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Rasterize(_) => "rasterize",
            Command::Train(_) => "train",
            Command::Infer(_) => "infer",
            Command::Track(_) => "track",
            Command::Eval(_) => "eval",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 4)]
    pub sequences: usize,
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    #[arg(long, default_value_t = 10)]
    pub agents: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 0.15)]
    pub abdomen_fraction: f64,
    #[arg(long, default_value_t = 4.0)]
    pub max_speed: f64,
    #[arg(long, default_value_t = 8.0)]
    pub heading_noise: f64,
    #[arg(long, default_value_t = 80.0)]
    pub min_separation: f64,
    /// Probability of hiding the head cap of a body in a frame.
    #[arg(long, default_value_t = 0.0)]
    pub cue_dropout: f64,
    #[arg(long, default_value_t = 5.0)]
    pub noise: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum WeightArg {
    PerClass,
    Pooled,
}

#[derive(Args, Debug, Serialize)]
pub struct RasterizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = WeightArg::PerClass)]
    pub weights: WeightArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum ModeArg {
    Seg,
    Angle,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Separate test set; otherwise each sequence is split by --train-fraction.
    #[arg(long)]
    pub val_data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long)]
    pub recurrent: bool,
    #[arg(long, default_value_t = 18)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub base: usize,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    /// Square training crop; 0 uses whole frames.
    #[arg(long, default_value_t = 128)]
    pub crop: usize,
    /// Consecutive frames per training clip (default 1 for seg, 8 for angle).
    #[arg(long)]
    pub clip_len: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct ExtractArgs {
    #[arg(long, default_value_t = 100)]
    pub min_area: usize,
    #[arg(long, default_value_t = 6000)]
    pub max_area: usize,
    #[arg(long, default_value_t = 0.01)]
    pub quantile: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct InferArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub extract: ExtractArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct TrackArgs {
    #[arg(long)]
    pub detections: PathBuf,
    /// Dataset the detections came from; supplies frame size and overlay frames.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 5)]
    pub gap: usize,
    #[arg(long, default_value_t = 80.0)]
    pub gate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_pos: f64,
    #[arg(long, default_value_t = 0.5)]
    pub w_ang: f64,
    #[arg(long, default_value_t = 0.5)]
    pub w_vel: f64,
    #[arg(long, default_value_t = 5)]
    pub min_len: usize,
    #[arg(long, default_value_t = 50.0)]
    pub margin: f64,
    /// Write trajectory overlays onto the last frame of each sequence (needs --data).
    #[arg(long)]
    pub overlay: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Dataset with ground-truth annotations.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long, default_value_t = MATCH_RADIUS)]
    pub radius: f64,
    /// Bin size of the false-positive histogram.
    #[arg(long, default_value_t = 32)]
    pub bin: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    /// Directories produced by `eval`.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub version: String,
    pub duration_secs: f64,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Invalid(_) => EXIT_USAGE,
            Error::Numeric(_) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::from(Error::from(e))
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

type CmdResult<T = ()> = std::result::Result<T, Failure>;

struct Outcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match run_inner(args) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn parse(args: &[OsString]) -> CmdResult<Cli> {
    Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        let _ = e.print();
        Failure { code, message: if code == EXIT_OK { String::new() } else { "invalid arguments".into() } }
    })
}

fn run_inner(args: Vec<OsString>) -> CmdResult {
    let mut cli = parse(&args)?;
    let mut recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    if let Some(path) = cli.manifest.clone() {
        let manifest: RunManifest = serde_json::from_slice(&fs::read(&path)?)
            .map_err(|e| Failure { code: EXIT_DATA, message: format!("{}: {e}", path.display()) })?;
        let mut replay: Vec<OsString> = vec![args[0].clone()];
        replay.extend(manifest.args.iter().map(OsString::from));
        let override_out = cli.out.clone();
        cli = parse(&replay)?;
        if cli.manifest.is_some() {
            return Err(usage("a replayed manifest cannot itself replay a manifest"));
        }
        recorded = manifest.args;
        if let Some(out) = override_out {
            cli.out = Some(out.clone());
            let pos = recorded.iter().position(|a| a == "--out");
            match pos {
                Some(i) if i + 1 < recorded.len() => recorded[i + 1] = out.to_string_lossy().into_owned(),
                _ => recorded.extend(["--out".to_string(), out.to_string_lossy().into_owned()]),
            }
        }
    }
    if let Some(Command::Train(a)) = cli.command.as_mut() {
        a.clip_len.get_or_insert(default_clip_len(a.mode));
    }
    let Some(command) = cli.command.as_ref() else {
        return Err(usage("no command given (see --help)"));
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli.out.clone().ok_or_else(|| usage(format!("{} needs --out", command.name())))?;
    fs::create_dir_all(&out)?;
    let start = Instant::now();
    let outcome = match command {
        Command::Simulate(a) => simulate(a, cli.seed, &out)?,
        Command::Rasterize(a) => rasterize(a, &out)?,
        Command::Train(a) => train(a, cli.seed, &out)?,
        Command::Infer(a) => infer(a, &out)?,
        Command::Track(a) => track(a, &out)?,
        Command::Eval(a) => eval(a, &out)?,
        Command::Report(a) => report(a, &out)?,
    };
    let manifest = RunManifest {
        command: command.name().to_string(),
        args: recorded,
        config: serde_json::to_value(&cli).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })?,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        seed: cli.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_secs: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out.join(RUN_MANIFEST), json + "\n")?;
    Ok(())
}

fn simulate(a: &SimulateArgs, seed: u64, out: &Path) -> CmdResult<Outcome> {
    let config = SynthConfig {
        width: a.width,
        height: a.height,
        agents: a.agents,
        frames: a.frames,
        abdomen_fraction: a.abdomen_fraction,
        max_speed: a.max_speed,
        heading_noise: a.heading_noise,
        min_separation: a.min_separation,
        cue_dropout: a.cue_dropout,
        background: Background { noise_std: a.noise, ..Background::default() },
        seed,
        ..SynthConfig::default()
    };
    config.validate()?;
    let names = synth::write_dataset(out, &config, a.sequences)?;
    println!("wrote {} sequences of {} frames to {}", names.len(), a.frames, out.display());
    let mut outputs: Vec<PathBuf> = names.iter().map(|n| out.join(n)).collect();
    outputs.push(out.join(synth::MANIFEST_FILE));
    Ok(Outcome { inputs: vec![], outputs })
}

fn rasterize(a: &RasterizeArgs, out: &Path) -> CmdResult<Outcome> {
    let data = Dataset::load(&a.data)?;
    let counts = training::dataset_class_counts(&data)?;
    let mode = match a.weights {
        WeightArg::PerClass => WeightMode::PerClass,
        WeightArg::Pooled => WeightMode::ForegroundPooled,
    };
    let mut outputs = Vec::new();
    for seq in &data.sequences {
        let dir = out.join(&seq.name);
        fs::create_dir_all(&dir)?;
        for (rec, img) in seq.records.iter().zip(&seq.images) {
            let (w, h) = (img.width(), img.height());
            let stem = Path::new(&rec.image).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let classes = labelgen::rasterize_class_map(&rec.annotations, w, h);
            let angles: labelgen::AngleMap<f32> = labelgen::rasterize_angle_map(&rec.annotations, w, h);
            let weights: labelgen::WeightMap<f32> = labelgen::build_weight_map(&rec.annotations, &counts, mode, w, h)?;
            let peak = weights.data().iter().copied().fold(1.0f32, f32::max);
            let weight_img = weights.map(|&v| ((v - 1.0) / (peak - 1.0).max(1e-6) * 255.0).round() as u8);
            imageio::write_gray(&dir.join(format!("{stem}_class.png")), &imageio::class_map_image(&classes))?;
            imageio::write_gray(&dir.join(format!("{stem}_angle.png")), &imageio::angle_map_image(&angles))?;
            imageio::write_gray(&dir.join(format!("{stem}_weight.png")), &weight_img)?;
        }
        outputs.push(dir);
    }
    println!(
        "class counts: background {} bee {} abdomen {}",
        counts.background, counts.bee, counts.abdomen
    );
    Ok(Outcome { inputs: vec![a.data.clone()], outputs })
}

fn default_clip_len(mode: ModeArg) -> usize {
    match mode {
        ModeArg::Seg => 1,
        ModeArg::Angle => 8,
    }
}

fn train(a: &TrainArgs, seed: u64, out: &Path) -> CmdResult<Outcome> {
    if a.epochs == 0 {
        return Err(usage("--epochs must be at least 1"));
    }
    let task = match a.mode {
        ModeArg::Seg => Task::Segmentation,
        ModeArg::Angle => Task::Orientation,
    };
    let opts = TrainOptions {
        task,
        recurrent: a.recurrent,
        epochs: a.epochs,
        base_filters: a.base,
        depth: a.depth,
        learning_rate: a.lr,
        batch_size: a.batch,
        crop: a.crop,
        clip_len: a.clip_len.unwrap_or(default_clip_len(a.mode)),
        seed,
    };
    opts.validate()?;
    let data = Dataset::load(&a.data)?;
    let mut inputs = vec![a.data.clone()];
    let (train_set, test_set) = match &a.val_data {
        Some(v) => {
            inputs.push(v.clone());
            (data, Dataset::load(v)?)
        }
        None => data.split_prefix(a.train_fraction)?,
    };
    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let mut curve = csv_file(&out.join(LOSS_CURVE))?;
    writeln!(curve, "epoch,train_loss,test_loss")?;
    let mut outputs = vec![out.join(LOSS_CURVE)];
    let net = training::train(&train_set, &test_set, &opts, |s, net| {
        let test = s.test_loss.map_or("NA".to_string(), |v| format!("{v:.6}"));
        writeln!(curve, "{},{:.6},{test}", s.epoch, s.train_loss)?;
        curve.flush()?;
        let path = ckpt_dir.join(format!("epoch_{:03}.ckpt", s.epoch));
        save_checkpoint(net, &path)?;
        println!("epoch {:>3}  train {:.5}  test {test}", s.epoch, s.train_loss);
        outputs.push(path);
        Ok(())
    })?;
    let final_path = out.join(FINAL_CHECKPOINT);
    save_checkpoint(&net, &final_path)?;
    println!("{}", final_path.display());
    outputs.push(final_path);
    Ok(Outcome { inputs, outputs })
}

fn csv_file(path: &Path) -> CmdResult<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

fn infer(a: &InferArgs, out: &Path) -> CmdResult<Outcome> {
    let net: Network<f32> = load_checkpoint(&a.checkpoint)?;
    let data = Dataset::load(&a.data)?;
    let params = ExtractParams { min_area: a.extract.min_area, max_area: a.extract.max_area, quantile: a.extract.quantile };
    let mut frames: Vec<FrameDetections> = Vec::new();
    for seq in &data.sequences {
        frames.extend(detect_sequence(&net, seq, &params)?);
    }
    let path = out.join(DETECTIONS);
    write_detections(&frames, csv_file(&path)?)?;
    let count: usize = frames.iter().map(|f| f.detections.len()).sum();
    println!("{count} detections in {} frames -> {}", frames.len(), path.display());
    Ok(Outcome { inputs: vec![a.data.clone(), a.checkpoint.clone()], outputs: vec![path] })
}

/// Detections grouped per sequence (in order of first appearance) and
/// indexed by frame.
fn frames_by_sequence(rows: Vec<FrameDetections>) -> Vec<(String, Vec<Vec<Detection>>)> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, Vec<Vec<Detection>>> = BTreeMap::new();
    for f in rows {
        if !grouped.contains_key(&f.sequence) {
            order.push(f.sequence.clone());
        }
        let frames = grouped.entry(f.sequence).or_default();
        if frames.len() <= f.frame {
            frames.resize(f.frame + 1, Vec::new());
        }
        frames[f.frame].extend(f.detections);
    }
    order.into_iter().map(|s| {
        let frames = grouped.remove(&s).unwrap_or_default();
        (s, frames)
    }).collect()
}

fn track(a: &TrackArgs, out: &Path) -> CmdResult<Outcome> {
    let params = LinkParams {
        max_gap: a.gap,
        gate: a.gate,
        w_pos: a.w_pos,
        w_ang: a.w_ang,
        w_vel: a.w_vel,
        min_len: a.min_len,
        margin: a.margin,
    };
    params.validate()?;
    if a.overlay && a.data.is_none() {
        return Err(usage("--overlay needs --data"));
    }
    let rows = parse_detections(fs::File::open(&a.detections)?)?;
    let data = a.data.as_deref().map(Dataset::load).transpose()?;
    let (width, height) = match &data {
        Some(d) => d.frame_size()?,
        None => (a.width, a.height),
    };
    let path = out.join(TRACKS);
    let mut w = csv::Writer::from_writer(csv_file(&path)?);
    w.write_record(tracker::TRACK_HEADER).map_err(Error::from)?;
    let mut outputs = vec![path.clone()];
    let mut total = 0;
    for (sequence, frames) in frames_by_sequence(rows) {
        let tracks = tracker::filter_tracks(tracker::link_frames(&frames, &params), &params, width, height);
        total += tracks.len();
        tracker::write_track_rows(&mut w, &sequence, &tracks)?;
        if a.overlay {
            let seq = data.as_ref().and_then(|d| d.sequences.iter().find(|s| s.name == sequence));
            if let Some(seq) = seq.filter(|s| !s.is_empty()) {
                let last = seq.len() - 1;
                let overlay = out.join(format!("{sequence}_tracks.png"));
                tracker::save_overlay(&overlay, &seq.images[last], &tracks, seq.records[last].frame)?;
                outputs.push(overlay);
            }
        }
    }
    w.flush()?;
    println!("{total} tracks -> {}", path.display());
    let mut inputs = vec![a.detections.clone()];
    inputs.extend(a.data.clone());
    Ok(Outcome { inputs, outputs })
}

/// Per-frame matchings of a detection table against a ground-truth dataset.
pub fn match_dataset(truth: &Dataset, rows: Vec<FrameDetections>, radius: f64) -> Vec<Matching> {
    let mut by_frame: BTreeMap<(String, usize), Vec<Detection>> = BTreeMap::new();
    for f in rows {
        by_frame.entry((f.sequence, f.frame)).or_default().extend(f.detections);
    }
    let mut out = Vec::new();
    for seq in &truth.sequences {
        for (rec, img) in seq.records.iter().zip(&seq.images) {
            let dets = by_frame.remove(&(seq.name.clone(), rec.frame)).unwrap_or_default();
            out.push(match_detections(&rec.annotations, &dets, radius, img.width(), img.height()));
        }
    }
    out
}

fn eval(a: &EvalArgs, out: &Path) -> CmdResult<Outcome> {
    let truth = Dataset::load(&a.truth)?;
    let rows = parse_detections(fs::File::open(&a.detections)?)?;
    let matchings = match_dataset(&truth, rows, a.radius);
    let reports: Vec<MetricsReport> = [Variant::Full, Variant::Margin50]
        .into_iter()
        .map(|v| evaluator::compute_metrics(&matchings, v))
        .collect::<combtrack::Result<_>>()?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&r.to_text());
        text.push('\n');
    }
    if let Some(f) = evaluator::margin_fp_fraction(&matchings) {
        text.push_str(&format!("fp_fraction_within_margin: {f:.4}\n\n"));
    }
    text.push_str(&evaluator::reference_footer());
    fs::write(out.join(REPORT_TEXT), &text)?;
    evaluator::write_reports_csv(&reports, csv_file(&out.join(REPORT_CSV))?)?;
    let hist = evaluator::boundary_histogram(&matchings, a.bin)?;
    let mut hf = csv_file(&out.join(FP_HISTOGRAM))?;
    for y in 0..hist.height() {
        let row: Vec<String> = (0..hist.width()).map(|x| hist.get(x, y).to_string()).collect();
        writeln!(hf, "{}", row.join(","))?;
    }
    hf.flush()?;
    print!("{text}");
    Ok(Outcome {
        inputs: vec![a.truth.clone(), a.detections.clone()],
        outputs: vec![out.join(REPORT_TEXT), out.join(REPORT_CSV), out.join(FP_HISTOGRAM)],
    })
}

fn report(a: &ReportArgs, out: &Path) -> CmdResult<Outcome> {
    let mut table: Vec<(String, csv::StringRecord)> = Vec::new();
    let mut header: Option<csv::StringRecord> = None;
    for run in &a.runs {
        let path = run.join(REPORT_CSV);
        let mut rd = csv::Reader::from_path(&path).map_err(Error::from)?;
        let h = rd.headers().map_err(Error::from)?.clone();
        if header.as_ref().is_some_and(|prev| prev != &h) {
            return Err(Failure { code: EXIT_DATA, message: format!("{}: different report fields", path.display()) });
        }
        header = Some(h);
        for rec in rd.records() {
            table.push((run.display().to_string(), rec.map_err(Error::from)?));
        }
    }
    let header = header.ok_or_else(|| usage("no runs given"))?;
    let path = out.join("summary.csv");
    let mut w = csv::Writer::from_writer(csv_file(&path)?);
    let mut cols = vec!["run"];
    cols.extend(header.iter());
    w.write_record(&cols).map_err(Error::from)?;
    for (run, rec) in &table {
        let mut row = vec![run.as_str()];
        row.extend(rec.iter());
        w.write_record(&row).map_err(Error::from)?;
        println!("{run}: {}", rec.iter().zip(header.iter()).map(|(v, k)| format!("{k}={v}")).collect::<Vec<_>>().join(" "));
    }
    w.flush()?;
    print!("{}", evaluator::reference_footer());
    Ok(Outcome { inputs: a.runs.clone(), outputs: vec![path] })
}
