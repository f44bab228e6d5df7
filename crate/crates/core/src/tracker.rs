//! Frame-to-frame linking of detections into trajectories.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::orientation_distance;
use crate::grid::Grid;
use crate::instancer::Detection;

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub id: usize,
    /// `(frame, detection)`, frames strictly increasing.
    pub nodes: Vec<(usize, Detection)>,
}

impl Track {
    pub fn last_seen(&self) -> usize {
        self.nodes.last().map_or(0, |n| n.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Per-frame displacement between the last two nodes.
    pub fn velocity(&self) -> (f64, f64) {
        match self.nodes.as_slice() {
            [.., (f0, a), (f1, b)] => {
                let dt = (f1 - f0) as f64;
                ((b.x - a.x) / dt, (b.y - a.y) / dt)
            }
            _ => (0.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkParams {
    pub max_gap: usize,
    /// Pixels per frame.
    pub gate: f64,
    pub w_pos: f64,
    pub w_ang: f64,
    pub w_vel: f64,
    pub min_len: usize,
    pub margin: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self { max_gap: 5, gate: 80.0, w_pos: 1.0, w_ang: 0.5, w_vel: 0.5, min_len: 5, margin: 50.0 }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_gap < 1 {
            return Err(Error::Invalid("max gap must be at least 1".into()));
        }
        if !(self.gate > 0.0) {
            return Err(Error::Invalid(format!("gate must be positive, got {}", self.gate)));
        }
        if [self.w_pos, self.w_ang, self.w_vel].iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Invalid("cost weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Cost of extending `track` with `det` at `frame`; `None` when the link is
/// out of reach (gap too long or the position term above 1).
pub fn link_cost(track: &Track, det: &Detection, frame: usize, params: &LinkParams) -> Option<f64> {
    let (last_frame, last) = track.nodes.last()?;
    if frame <= *last_frame || frame - last_frame > params.max_gap {
        return None;
    }
    let g = (frame - last_frame) as f64;
    let (vx, vy) = track.velocity();
    let (px, py) = (last.x + g * vx, last.y + g * vy);
    let position = (det.x - px).hypot(det.y - py) / (params.gate * g);
    if position > 1.0 {
        return None;
    }
    let angle = orientation_distance(last.directed, det.directed) / 180.0;
    let (nvx, nvy) = ((det.x - last.x) / g, (det.y - last.y) / g);
    let velocity = (nvx - vx).hypot(nvy - vy) / params.gate;
    Some(params.w_pos * position + params.w_ang * angle + params.w_vel * velocity)
}

/// Greedy ascending-cost association, frame by frame. `frames[t]` holds the
/// detections of frame `t`.
pub fn link_frames(frames: &[Vec<Detection>], params: &LinkParams) -> Vec<Track> {
    let mut closed: Vec<Track> = Vec::new();
    let mut active: Vec<Track> = Vec::new();
    let mut next_id = 0;
    for (t, dets) in frames.iter().enumerate() {
        let (keep, expired): (Vec<Track>, Vec<Track>) =
            active.into_iter().partition(|tr| t - tr.last_seen() <= params.max_gap);
        closed.extend(expired);
        active = keep;

        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for tr in &active {
            for (di, d) in dets.iter().enumerate() {
                if let Some(c) = link_cost(tr, d, t, params) {
                    candidates.push((c, tr.id, di));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; active.len()];
        let mut det_used = vec![false; dets.len()];
        for (_, id, di) in candidates {
            // active is kept in ascending id order
            let ti = active.binary_search_by_key(&id, |tr| tr.id).expect("candidate track is active");
            if track_used[ti] || det_used[di] {
                continue;
            }
            track_used[ti] = true;
            det_used[di] = true;
            active[ti].nodes.push((t, dets[di]));
        }
        for (di, d) in dets.iter().enumerate() {
            if !det_used[di] {
                active.push(Track { id: next_id, nodes: vec![(t, *d)] });
                next_id += 1;
            }
        }
    }
    closed.extend(active);
    closed.sort_by_key(|tr| tr.id);
    closed
}

/// Drops tracks that are short and both start and end away from the border.
pub fn filter_tracks(tracks: Vec<Track>, params: &LinkParams, width: usize, height: usize) -> Vec<Track> {
    let central = |d: &Detection| {
        let m = params.margin;
        d.x >= m && d.y >= m && width as f64 - d.x >= m && height as f64 - d.y >= m
    };
    tracks
        .into_iter()
        .filter(|tr| {
            if tr.len() >= params.min_len {
                return true;
            }
            match (tr.nodes.first(), tr.nodes.last()) {
                (Some(first), Some(last)) => !(central(&first.1) && central(&last.1)),
                _ => false,
            }
        })
        .collect()
}

pub const TRACK_HEADER: [&str; 6] = ["track_id", "sequence", "frame", "x", "y", "directed_deg"];

pub fn write_tracks<W: Write>(sequence: &str, tracks: &[Track], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACK_HEADER)?;
    write_track_rows(&mut w, sequence, tracks)?;
    w.flush()?;
    Ok(())
}

pub fn write_track_rows<W: Write>(w: &mut csv::Writer<W>, sequence: &str, tracks: &[Track]) -> Result<()> {
    for tr in tracks {
        for (frame, d) in &tr.nodes {
            w.write_record([
                tr.id.to_string(),
                sequence.to_string(),
                frame.to_string(),
                format!("{:.4}", d.x),
                format!("{:.4}", d.y),
                format!("{:.4}", d.directed.value()),
            ])?;
        }
    }
    Ok(())
}

/// Burns trajectories up to and including `frame` into a copy of `image`,
/// each in its own gray level.
pub fn draw_overlay(image: &Grid<u8>, tracks: &[Track], frame: usize) -> Grid<u8> {
    let mut out = image.clone();
    let (w, h) = (out.width() as i64, out.height() as i64);
    for tr in tracks {
        let shade = if tr.id % 2 == 0 { 255 } else { 0 };
        let points: Vec<(f64, f64)> = tr.nodes.iter().filter(|n| n.0 <= frame).map(|n| (n.1.x, n.1.y)).collect();
        for pair in points.windows(2) {
            let ((x0, y0), (x1, y1)) = (pair[0], pair[1]);
            let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
            for s in 0..=steps {
                let f = s as f64 / steps as f64;
                let (x, y) = ((x0 + f * (x1 - x0)) as i64, (y0 + f * (y1 - y0)) as i64);
                if x >= 0 && y >= 0 && x < w && y < h {
                    *out.get_mut(x as usize, y as usize) = shade;
                }
            }
        }
    }
    out
}

pub fn save_overlay(path: &Path, image: &Grid<u8>, tracks: &[Track], frame: usize) -> Result<()> {
    crate::imageio::write_gray(path, &draw_overlay(image, tracks, frame))
}
