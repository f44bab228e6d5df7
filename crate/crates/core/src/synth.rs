//! Synthetic hive sequences with exact ground truth.
//!
//! Agents are elliptical bodies shaded front to back, with a bright head cap
//! and dark bands on the rear half (or ring-textured discs for cell-bound
//! abdomens) drifting over a hexagonal comb texture.
//! Everything is driven by one ChaCha8 stream per sequence, so a seed fully
//! determines frames and truth.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::annotation::{write_annotations, Annotation, FrameRecord, Kind};
use crate::error::{Error, Result};
use crate::geom::OrientationDeg;
use crate::grid::Grid;
use crate::imageio;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Background {
    pub mean: f64,
    pub contrast: f64,
    /// Comb cell spacing in pixels.
    pub cell_period: f64,
    /// Per-pixel Gaussian noise, redrawn every frame.
    pub noise_std: f64,
}

impl Default for Background {
    fn default() -> Self {
        Self { mean: 100.0, contrast: 30.0, cell_period: 22.0, noise_std: 5.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub agents: usize,
    pub frames: usize,
    pub semi_minor: f64,
    pub semi_major: f64,
    pub abdomen_fraction: f64,
    /// Pixels per frame.
    pub max_speed: f64,
    /// Degrees per frame.
    pub heading_noise: f64,
    pub min_separation: f64,
    /// Probability that a body is drawn without its front/back markings
    /// (head cap, shading ramp, rear bands) in a given frame.
    pub cue_dropout: f64,
    pub background: Background,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            agents: 10,
            frames: 60,
            semi_minor: 20.0,
            semi_major: 35.0,
            abdomen_fraction: 0.15,
            max_speed: 4.0,
            heading_noise: 8.0,
            min_separation: 80.0,
            cue_dropout: 0.0,
            background: Background::default(),
            seed: 0,
        }
    }
}

/// Body brightness at the center and its drop towards the rim.
const BODY_LEVEL: f64 = 200.0;
const BODY_FALLOFF: f64 = 30.0;
const HEAD_BOOST: f64 = 40.0;
/// Head cap center along the heading, as a fraction of the semi-major axis.
const HEAD_OFFSET: f64 = 0.6;
/// Head cap radius as a fraction of the semi-minor axis.
const HEAD_RADIUS: f64 = 0.45;
/// Brightness change from the body center to the front tip.
const BODY_RAMP: f64 = 25.0;
const BAND_DEPTH: f64 = 35.0;
const BAND_PERIOD: f64 = 9.0;
const ABDOMEN_LEVEL: f64 = 150.0;
const ABDOMEN_RING: f64 = 25.0;
const PHASE_JITTER: f64 = 8.0;
const PLACEMENT_ATTEMPTS: usize = 200;
const PLACEMENT_TRIES_PER_AGENT: usize = 500;
const REPULSION: f64 = 0.25;
const SPEED_STEP: f64 = 0.3;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.width == 0 || self.height == 0 {
            return bad("frame size must be positive".into());
        }
        if !(self.semi_minor > 0.0 && self.semi_major >= self.semi_minor) {
            return bad(format!("bad body semi-axes {} / {}", self.semi_minor, self.semi_major));
        }
        if !(0.0..=1.0).contains(&self.abdomen_fraction) || !(0.0..=1.0).contains(&self.cue_dropout) {
            return bad("fractions must lie in [0, 1]".into());
        }
        if !(self.max_speed >= 0.0 && self.heading_noise >= 0.0 && self.min_separation >= 0.0) {
            return bad("speeds, noise and separation must be non-negative".into());
        }
        // disks of diameter min_separation must pack into the frame
        let packed = self.agents as f64 * std::f64::consts::PI * (self.min_separation / 2.0).powi(2);
        if packed > (self.width * self.height) as f64 {
            return Err(Error::Data(format!(
                "{} agents cannot keep {} px apart in {}x{}",
                self.agents, self.min_separation, self.width, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub heading: OrientationDeg,
    pub speed: f64,
    /// Heading change applied in the last step.
    pub turn_rate: f64,
    pub kind: Kind,
    /// Per-agent brightness jitter in `[-1, 1]`.
    pub phase: f64,
    /// Whether the front/back markings are drawn this frame.
    pub cue_visible: bool,
}

impl AgentState {
    pub fn annotation(&self) -> Annotation {
        match self.kind {
            Kind::FullBee => Annotation { x: self.x, y: self.y, kind: Kind::FullBee, angle: self.heading },
            Kind::Abdomen => Annotation::abdomen(self.x, self.y),
        }
    }
}

pub struct Sequence {
    pub frames: Vec<Grid<u8>>,
    pub truth: Vec<FrameRecord>,
    pub states: Vec<Vec<AgentState>>,
}

pub fn frame_file_name(frame: usize) -> String {
    format!("frame_{frame:04}.png")
}

fn bounds(config: &SynthConfig) -> (f64, f64) {
    (config.width as f64 - 1.0, config.height as f64 - 1.0)
}

fn place_agents(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<AgentState>> {
    let (xmax, ymax) = bounds(config);
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut agents: Vec<AgentState> = Vec::with_capacity(config.agents);
        'agents: for _ in 0..config.agents {
            for _ in 0..PLACEMENT_TRIES_PER_AGENT {
                let (x, y) = (rng.random_range(1.0..xmax), rng.random_range(1.0..ymax));
                if agents.iter().all(|a| (a.x - x).hypot(a.y - y) >= config.min_separation) {
                    let abdomen = rng.random_bool(config.abdomen_fraction);
                    let heading = if abdomen { 0.0 } else { rng.random_range(0.0..360.0) };
                    agents.push(AgentState {
                        x,
                        y,
                        heading: OrientationDeg::new(heading)?,
                        speed: if abdomen { 0.0 } else { rng.random_range(0.5..=1.0) * config.max_speed },
                        turn_rate: 0.0,
                        kind: if abdomen { Kind::Abdomen } else { Kind::FullBee },
                        phase: rng.random_range(-1.0..=1.0),
                        cue_visible: true,
                    });
                    continue 'agents;
                }
            }
            break;
        }
        if agents.len() == config.agents {
            return Ok(agents);
        }
    }
    Err(Error::Data(format!(
        "could not place {} agents {} px apart after {PLACEMENT_ATTEMPTS} attempts",
        config.agents, config.min_separation
    )))
}

fn reflect(mut v: f64, lo: f64, hi: f64) -> (f64, bool) {
    let mut flipped = false;
    for _ in 0..4 {
        if v < lo {
            v = 2.0 * lo - v;
            flipped = !flipped;
        } else if v > hi {
            v = 2.0 * hi - v;
            flipped = !flipped;
        } else {
            break;
        }
    }
    (v.clamp(lo, hi), flipped)
}

fn step(agents: &mut [AgentState], config: &SynthConfig, rng: &mut ChaCha8Rng, turn: &Normal<f64>) -> Result<()> {
    let (xmax, ymax) = bounds(config);
    for a in agents.iter_mut() {
        a.cue_visible = !rng.random_bool(config.cue_dropout);
        if a.kind == Kind::Abdomen {
            continue;
        }
        a.turn_rate = turn.sample(rng);
        a.heading = a.heading.rotated(a.turn_rate)?;
        a.speed = (a.speed + rng.random_range(-SPEED_STEP..=SPEED_STEP)).clamp(0.0, config.max_speed);
        let (ux, uy) = a.heading.unit_vector();
        a.x += a.speed * ux;
        a.y += a.speed * uy;
    }
    // soft pairwise repulsion; stationary abdomens never move
    let n = agents.len();
    let mut push = vec![(0.0, 0.0); n];
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (agents[j].x - agents[i].x, agents[j].y - agents[i].y);
            let d = dx.hypot(dy);
            if d >= config.min_separation || d == 0.0 {
                continue;
            }
            let (ex, ey) = (dx / d, dy / d);
            let amount = REPULSION * (config.min_separation - d);
            let (mi, mj) = (agents[i].kind == Kind::FullBee, agents[j].kind == Kind::FullBee);
            let (si, sj) = match (mi, mj) {
                (true, true) => (0.5, 0.5),
                (true, false) => (1.0, 0.0),
                (false, true) => (0.0, 1.0),
                (false, false) => (0.0, 0.0),
            };
            push[i].0 -= si * amount * ex;
            push[i].1 -= si * amount * ey;
            push[j].0 += sj * amount * ex;
            push[j].1 += sj * amount * ey;
        }
    }
    for (a, (px, py)) in agents.iter_mut().zip(push) {
        a.x += px;
        a.y += py;
        let (x, fx) = reflect(a.x, 1.0, xmax);
        let (y, fy) = reflect(a.y, 1.0, ymax);
        a.x = x;
        a.y = y;
        if a.kind == Kind::FullBee && (fx || fy) {
            let h = a.heading.value();
            let h = if fx { 360.0 - h } else { h };
            let h = if fy { 180.0 - h } else { h };
            a.heading = OrientationDeg::new(h)?;
        }
    }
    Ok(())
}

/// Hexagonal comb texture: three plane waves 60 degrees apart.
pub fn background_texture(config: &SynthConfig) -> Grid<f64> {
    let bg = config.background;
    let k = 2.0 * std::f64::consts::PI / (bg.cell_period * 3f64.sqrt() / 2.0);
    let dirs: Vec<(f64, f64)> = (0..3).map(|i| (i as f64 * 60f64).to_radians()).map(|t| (t.cos(), t.sin())).collect();
    let mut out = Grid::filled(config.width, config.height, 0.0);
    for y in 0..config.height {
        for x in 0..config.width {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let s: f64 = dirs.iter().map(|(dx, dy)| (k * (dx * px + dy * py)).cos()).sum();
            // s lies in [-1.5, 3]
            *out.get_mut(x, y) = bg.mean + bg.contrast * (s / 3.0);
        }
    }
    out
}

fn body_coords(a: &AgentState, px: f64, py: f64) -> (f64, f64) {
    let (ux, uy) = a.heading.unit_vector();
    let (dx, dy) = (px - a.x, py - a.y);
    (dx * ux + dy * uy, dx * -uy + dy * ux)
}

/// Squared normalized radius inside the agent's footprint, if covered.
fn coverage(a: &AgentState, config: &SynthConfig, px: f64, py: f64) -> Option<f64> {
    let r2 = match a.kind {
        Kind::FullBee => {
            let (along, across) = body_coords(a, px, py);
            (along / config.semi_major).powi(2) + (across / config.semi_minor).powi(2)
        }
        Kind::Abdomen => ((px - a.x).powi(2) + (py - a.y).powi(2)) / config.semi_minor.powi(2),
    };
    (r2 <= 1.0).then_some(r2)
}

fn agent_intensity(a: &AgentState, config: &SynthConfig, px: f64, py: f64, r2: f64) -> f64 {
    let jitter = PHASE_JITTER * a.phase;
    match a.kind {
        Kind::FullBee => {
            let mut v = BODY_LEVEL - BODY_FALLOFF * r2 + jitter;
            if a.cue_visible {
                let (along, _) = body_coords(a, px, py);
                v += BODY_RAMP * along / config.semi_major;
                if along < 0.0 {
                    let phase = std::f64::consts::TAU * along / BAND_PERIOD;
                    v -= BAND_DEPTH * 0.5 * (1.0 - phase.cos());
                }
                let (ux, uy) = a.heading.unit_vector();
                let off = HEAD_OFFSET * config.semi_major;
                let (hx, hy) = (a.x + off * ux, a.y + off * uy);
                if (px - hx).hypot(py - hy) <= HEAD_RADIUS * config.semi_minor {
                    v += HEAD_BOOST;
                }
            }
            v
        }
        Kind::Abdomen => {
            let r = (px - a.x).hypot(py - a.y);
            ABDOMEN_LEVEL + ABDOMEN_RING * (std::f64::consts::PI * r / 4.0).cos() + jitter
        }
    }
}

/// Deterministic, noise-free rendering; each pixel shows the covering agent
/// with the nearest center.
pub fn render_clean(states: &[AgentState], config: &SynthConfig, background: &Grid<f64>) -> Grid<f64> {
    let mut out = background.clone();
    let mut best = vec![f64::INFINITY; config.width * config.height];
    for a in states {
        let reach = config.semi_major + 1.0;
        let x0 = (a.x - reach).floor().max(0.0) as usize;
        let x1 = ((a.x + reach).ceil().max(0.0) as usize).min(config.width);
        let y0 = (a.y - reach).floor().max(0.0) as usize;
        let y1 = ((a.y + reach).ceil().max(0.0) as usize).min(config.height);
        for y in y0..y1 {
            for x in x0..x1 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let Some(r2) = coverage(a, config, px, py) else { continue };
                let d2 = (px - a.x).powi(2) + (py - a.y).powi(2);
                let slot = y * config.width + x;
                if d2 < best[slot] {
                    best[slot] = d2;
                    *out.get_mut(x, y) = agent_intensity(a, config, px, py, r2);
                }
            }
        }
    }
    out
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Renders one frame without sensor noise.
pub fn render_frame(states: &[AgentState], config: &SynthConfig) -> Grid<u8> {
    render_clean(states, config, &background_texture(config)).map(|&v| quantize(v))
}

/// Generates one sequence from `config.seed` on ChaCha8 stream `stream`.
pub fn generate_sequence(config: &SynthConfig, name: &str, stream: u64) -> Result<Sequence> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let turn = Normal::new(0.0, config.heading_noise).map_err(|e| Error::Invalid(e.to_string()))?;
    let noise = Normal::new(0.0, config.background.noise_std).map_err(|e| Error::Invalid(e.to_string()))?;
    let background = background_texture(config);
    let mut agents = place_agents(config, &mut rng)?;
    for a in agents.iter_mut() {
        a.cue_visible = !rng.random_bool(config.cue_dropout);
    }
    let mut seq = Sequence { frames: Vec::new(), truth: Vec::new(), states: Vec::new() };
    for t in 0..config.frames {
        if t > 0 {
            step(&mut agents, config, &mut rng, &turn)?;
        }
        let clean = render_clean(&agents, config, &background);
        let frame = clean.map(|&v| quantize(v + noise.sample(&mut rng)));
        seq.truth.push(FrameRecord {
            sequence: name.to_string(),
            frame: t,
            image: frame_file_name(t),
            annotations: agents.iter().map(AgentState::annotation).collect(),
        });
        seq.frames.push(frame);
        seq.states.push(agents.clone());
    }
    Ok(seq)
}

pub fn sequence_name(index: usize) -> String {
    format!("seq_{index:03}")
}

pub const MANIFEST_FILE: &str = "manifest.csv";
pub use crate::dataset::ANNOTATION_FILE;

/// Writes `count` sequences under `out`: one directory per sequence with
/// PNG frames and `annotations.csv`, plus a top-level manifest.
pub fn write_dataset(out: &Path, config: &SynthConfig, count: usize) -> Result<Vec<String>> {
    fs::create_dir_all(out)?;
    let names: Vec<String> = (0..count).map(sequence_name).collect();
    names.par_iter().enumerate().try_for_each(|(i, name)| -> Result<()> {
        let seq = generate_sequence(config, name, i as u64)?;
        let dir = out.join(name);
        fs::create_dir_all(&dir)?;
        for (t, frame) in seq.frames.iter().enumerate() {
            imageio::write_gray(&dir.join(frame_file_name(t)), frame)?;
        }
        write_annotations(&seq.truth, fs::File::create(dir.join(ANNOTATION_FILE))?)?;
        Ok(())
    })?;
    let mut manifest = fs::File::create(out.join(MANIFEST_FILE))?;
    writeln!(manifest, "sequence,frames")?;
    for name in &names {
        writeln!(manifest, "{name},{}", config.frames)?;
    }
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::axis_distance;
    use crate::grid::Tensor;
    use crate::instancer::{extract_detections, ExtractParams, OutputMode};
    use crate::labelgen;

    fn small() -> SynthConfig {
        SynthConfig { frames: 12, seed: 5, ..SynthConfig::default() }
    }

    fn lone(heading: f64) -> AgentState {
        AgentState {
            x: 128.0,
            y: 128.0,
            heading: OrientationDeg::new(heading).unwrap(),
            speed: 0.0,
            turn_rate: 0.0,
            kind: Kind::FullBee,
            phase: 0.0,
            cue_visible: true,
        }
    }

    fn brightest_offset(img: &Grid<u8>) -> (f64, f64) {
        let max = *img.data().iter().max().unwrap();
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for y in 0..img.height() {
            for x in 0..img.width() {
                if *img.get(x, y) == max {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1.0;
                }
            }
        }
        (sx / n - 128.0, sy / n - 128.0)
    }

    #[test]
    fn deterministic_from_seed() {
        let a = generate_sequence(&small(), "s", 0).unwrap();
        let b = generate_sequence(&small(), "s", 0).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.truth, b.truth);
        let c = generate_sequence(&small(), "s", 1).unwrap();
        assert_ne!(a.frames, c.frames);
    }

    #[test]
    fn empty_scene() {
        let config = SynthConfig { agents: 0, frames: 3, ..small() };
        let seq = generate_sequence(&config, "s", 0).unwrap();
        assert!(seq.truth.iter().all(|r| r.annotations.is_empty()));
        assert_eq!(render_frame(&[], &config), background_texture(&config).map(|&v| quantize(v)));
    }

    #[test]
    fn head_cap_marks_heading() {
        let config = small();
        let (_, dy) = brightest_offset(&render_frame(&[lone(0.0)], &config));
        assert!(dy < -10.0);
        let (_, dy) = brightest_offset(&render_frame(&[lone(180.0)], &config));
        assert!(dy > 10.0);
        let (dx, _) = brightest_offset(&render_frame(&[lone(90.0)], &config));
        assert!(dx > 10.0);
    }

    #[test]
    fn hidden_markings_leave_a_symmetric_body() {
        let config = small();
        let bg = background_texture(&config);
        let hidden = |h: f64| AgentState { cue_visible: false, ..lone(h) };
        let max_diff = |a: &Grid<f64>, b: &Grid<f64>| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let (a, b) = (render_clean(&[hidden(30.0)], &config, &bg), render_clean(&[hidden(210.0)], &config, &bg));
        assert!(max_diff(&a, &b) < 1e-9);
        let (a, b) = (render_clean(&[lone(30.0)], &config, &bg), render_clean(&[lone(210.0)], &config, &bg));
        assert!(max_diff(&a, &b) > 30.0);
    }

    #[test]
    fn rear_half_is_darker() {
        let config = small();
        let bg = background_texture(&config);
        let img = render_clean(&[lone(0.0)], &config, &bg);
        let half_mean = |front: bool| {
            let rows = if front { 100..128 } else { 129..157 };
            let vals: Vec<f64> = rows.into_iter().flat_map(|y| (124..132).map(move |x| (x, y))).map(|(x, y)| *img.get(x, y)).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        assert!(half_mean(true) - half_mean(false) > 20.0);
    }

    #[test]
    fn body_contrast() {
        let config = small();
        let bg = background_texture(&config);
        let bg_mean = bg.data().iter().sum::<f64>() / bg.data().len() as f64;
        let img = render_clean(&[lone(30.0)], &config, &bg);
        let a = lone(30.0).annotation();
        let (mut s, mut n) = (0.0, 0.0);
        for y in 0..256 {
            for x in 0..256 {
                if labelgen::footprint_contains(&a, x as f64 + 0.5, y as f64 + 0.5) {
                    s += img.get(x, y);
                    n += 1.0;
                }
            }
        }
        assert!(s / n - bg_mean >= 40.0);
    }

    #[test]
    fn truth_stays_valid() {
        let config = SynthConfig { frames: 60, ..small() };
        let mut violations = 0;
        let mut pairs = 0;
        for stream in 0..3 {
            let seq = generate_sequence(&config, "s", stream).unwrap();
            for rec in &seq.truth {
                assert_eq!(rec.annotations.len(), config.agents);
                for (i, a) in rec.annotations.iter().enumerate() {
                    assert!(a.in_bounds(256, 256));
                    assert!((0.0..360.0).contains(&a.angle.value()));
                    for b in &rec.annotations[..i] {
                        pairs += 1;
                        if (a.x - b.x).hypot(a.y - b.y) < 0.5 * config.min_separation {
                            violations += 1;
                        }
                    }
                }
            }
        }
        assert!((violations as f64) < 0.01 * pairs as f64, "{violations} of {pairs}");
    }

    #[test]
    fn motion_is_bounded() {
        let seq = generate_sequence(&small(), "s", 2).unwrap();
        for w in seq.states.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                if a.kind == Kind::Abdomen {
                    assert_eq!((a.x, a.y), (b.x, b.y));
                }
            }
        }
    }

    #[test]
    fn infeasible_config_rejected() {
        let config = SynthConfig { agents: 40, ..small() };
        assert!(matches!(generate_sequence(&config, "s", 0), Err(Error::Data(_))));
    }

    #[test]
    fn truth_round_trips_through_labels() {
        let config = SynthConfig { min_separation: 80.0, frames: 3, ..small() };
        let seq = generate_sequence(&config, "s", 4).unwrap();
        let rec = &seq.truth[0];
        // isolated, fully visible agents only
        let map = labelgen::rasterize_class_map(&rec.annotations, 256, 256);
        let mut onehot = Tensor::<f32>::zeros(3, 256, 256);
        for (p, &c) in map.data().iter().enumerate() {
            onehot.data[c as usize * 65536 + p] = 1.0;
        }
        let dets = extract_detections(&onehot, OutputMode::Segmentation, &ExtractParams::default()).unwrap();
        let mut checked = 0;
        for a in &rec.annotations {
            let inside = a.x > 40.0 && a.y > 40.0 && a.x < 216.0 && a.y < 216.0;
            let isolated = rec.annotations.iter().all(|b| b == a || (a.x - b.x).hypot(a.y - b.y) > 75.0);
            if !(inside && isolated) {
                continue;
            }
            let d = dets.iter().find(|d| (d.x - a.x).hypot(d.y - a.y) <= 0.5).expect("agent recovered");
            assert_eq!(d.kind, a.kind);
            if a.kind == Kind::FullBee {
                assert!(axis_distance(d.axis, a.angle.axis()) <= 1.0);
            }
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn dataset_on_disk() {
        let dir = std::env::temp_dir().join(format!("combtrack-synth-{}", std::process::id()));
        let config = SynthConfig { frames: 2, ..small() };
        let names = write_dataset(&dir, &config, 2).unwrap();
        assert_eq!(names, vec!["seq_000", "seq_001"]);
        let manifest = fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap();
        assert_eq!(manifest, "sequence,frames\nseq_000,2\nseq_001,2\n");
        let img = imageio::read_gray(&dir.join("seq_001").join("frame_0001.png")).unwrap();
        assert_eq!((img.width(), img.height()), (256, 256));
        let recs = crate::annotation::parse_annotations(fs::File::open(dir.join("seq_000").join(ANNOTATION_FILE)).unwrap())
            .unwrap();
        assert_eq!(recs.len(), 2);
        fs::remove_dir_all(&dir).unwrap();
    }
}
