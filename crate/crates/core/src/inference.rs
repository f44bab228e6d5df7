//! Whole-sequence prediction and detection extraction.

use crate::annotation::FrameDetections;
use crate::dataset::SequenceData;
use crate::error::Result;
use crate::grid::{Grid, Tensor};
use crate::instancer::{extract_detections, Detection, ExtractParams, OutputMode};
use crate::net::{image_tensor, Network};
use crate::scalar::Scalar;

pub fn output_mode<T: Scalar>(net: &Network<T>) -> OutputMode {
    if net.config().is_orientation() {
        OutputMode::Orientation
    } else {
        OutputMode::Segmentation
    }
}

/// Image tensor grown to multiples of `m` by edge replication.
pub fn padded_input<T: Scalar>(image: &Grid<u8>, m: usize) -> Tensor<T> {
    let (w, h) = (image.width(), image.height());
    let (pw, ph) = (w.div_ceil(m) * m, h.div_ceil(m) * m);
    if (pw, ph) == (w, h) {
        return image_tensor(image);
    }
    let mut data = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        for x in 0..pw {
            data.push(*image.get(x.min(w - 1), y.min(h - 1)));
        }
    }
    image_tensor(&Grid::from_vec(pw, ph, data).expect("padded shape"))
}

fn crop_tensor<T: Scalar>(t: Tensor<T>, w: usize, h: usize) -> Tensor<T> {
    if (t.width, t.height) == (w, h) {
        return t;
    }
    let mut out = Tensor::zeros(t.channels, h, w);
    for c in 0..t.channels {
        for y in 0..h {
            let src = &t.channel(c)[y * t.width..y * t.width + w];
            out.channel_mut(c)[y * w..(y + 1) * w].copy_from_slice(src);
        }
    }
    out
}

/// Network outputs for every frame of a sequence, in frame order; priors
/// chain from frame to frame for recurrent networks.
pub fn predict_frames<T: Scalar>(net: &Network<T>, images: &[Grid<u8>]) -> Result<Vec<Tensor<T>>> {
    let m = net.config().size_multiple();
    let mut prior: Option<Tensor<T>> = None;
    let mut out = Vec::with_capacity(images.len());
    for img in images {
        let f = net.forward(&padded_input(img, m), prior.as_ref())?;
        if net.config().recurrent {
            prior = Some(f.penultimate);
        }
        out.push(crop_tensor(f.prediction, img.width(), img.height()));
    }
    Ok(out)
}

pub fn detect_frames<T: Scalar>(
    net: &Network<T>,
    images: &[Grid<u8>],
    params: &ExtractParams,
) -> Result<Vec<Vec<Detection>>> {
    let mode = output_mode(net);
    predict_frames(net, images)?.iter().map(|p| extract_detections(p, mode, params)).collect()
}

pub fn detect_sequence<T: Scalar>(
    net: &Network<T>,
    seq: &SequenceData,
    params: &ExtractParams,
) -> Result<Vec<FrameDetections>> {
    let dets = detect_frames(net, &seq.images, params)?;
    Ok(seq
        .records
        .iter()
        .zip(dets)
        .map(|(r, detections)| FrameDetections { sequence: seq.name.clone(), frame: r.frame, detections })
        .collect())
}
