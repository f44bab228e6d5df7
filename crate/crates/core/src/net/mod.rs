//! Compact U-Net style encoder-decoder with an optional recurrent prior.
//!
//! Each encoder level runs two 3x3 convolutions with rectified-linear
//! activations and then 2x2 max pooling, doubling the filter count per
//! level. The decoder mirrors it with 2x2 stride-2 transposed convolutions
//! and skip concatenation. A final 1x1 convolution maps the penultimate
//! field (concatenated with the previous frame's penultimate field in
//! recurrent configurations) to the output channels.

mod adam;
pub mod checkpoint;
pub mod ops;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Tensor;
use crate::labelgen::{AngleMap, ClassMap, WeightMap};
use crate::losses;
use crate::scalar::Scalar;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_checkpoint, load_checkpoint_as, read_checkpoint, save_checkpoint, write_checkpoint};

pub const KERNEL_SIZE: usize = 3;

/// The angle channel of an orientation network is the raw head output
/// times this gain, in degrees.
pub const ANGLE_OUTPUT_GAIN: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetConfig {
    pub base_filters: usize,
    pub depth: usize,
    pub in_channels: usize,
    /// 3 for segmentation, 2 for orientation (foreground logit + angle).
    pub out_channels: usize,
    pub recurrent: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { base_filters: 8, depth: 3, in_channels: 1, out_channels: 3, recurrent: false }
    }
}

impl NetConfig {
    pub fn segmentation(base_filters: usize, depth: usize) -> Self {
        Self { base_filters, depth, in_channels: 1, out_channels: 3, recurrent: false }
    }

    pub fn orientation(base_filters: usize, depth: usize, recurrent: bool) -> Self {
        Self { base_filters, depth, in_channels: 1, out_channels: 2, recurrent }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_filters == 0 || self.depth == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Invalid(format!("degenerate network config {self:?}")));
        }
        if self.depth > 10 {
            return Err(Error::Invalid(format!("depth {} is too deep", self.depth)));
        }
        Ok(())
    }

    pub fn is_orientation(&self) -> bool {
        self.out_channels == 2
    }

    pub fn filters(&self, level: usize) -> usize {
        self.base_filters << level
    }

    /// Channels entering the final 1x1 convolution.
    pub fn head_inputs(&self) -> usize {
        if self.recurrent {
            2 * self.base_filters
        } else {
            self.base_filters
        }
    }

    /// Spatial sizes must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.depth
    }

    fn angle_channel(&self) -> Option<usize> {
        self.is_orientation().then_some(losses::ANGLE_CHANNEL)
    }
}

/// Closed-form parameter count.
pub fn count_params(config: &NetConfig) -> usize {
    let conv = |cin: usize, cout: usize| KERNEL_SIZE * KERNEL_SIZE * cin * cout + cout;
    let mut total = 0;
    let mut cin = config.in_channels;
    for k in 0..=config.depth {
        let f = config.filters(k);
        total += conv(cin, f) + conv(f, f);
        cin = f;
    }
    for k in 0..config.depth {
        let f = config.filters(k);
        total += 4 * 2 * f * f + f; // transposed conv from 2f to f
        total += conv(2 * f, f) + conv(f, f);
    }
    total + config.head_inputs() * config.out_channels + config.out_channels
}

/// A named parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub value: Vec<T>,
}

#[derive(Clone, Copy, Debug)]
struct ConvIdx {
    weight: usize,
    bias: usize,
}

#[derive(Clone, Copy, Debug)]
struct LevelIdx {
    conv1: ConvIdx,
    conv2: ConvIdx,
}

#[derive(Clone, Copy, Debug)]
struct DecoderIdx {
    up: ConvIdx,
    conv1: ConvIdx,
    conv2: ConvIdx,
}

/// Parameter indices of each layer, derived from the config.
#[derive(Clone, Debug)]
struct Layout {
    encoder: Vec<LevelIdx>,
    bottleneck: LevelIdx,
    /// indexed by level, 0 = full resolution
    decoder: Vec<DecoderIdx>,
    head: ConvIdx,
}

/// Parameter shapes in storage order, with their fan-in.
fn param_specs(config: &NetConfig) -> Vec<(String, Vec<usize>, usize)> {
    let mut specs = Vec::new();
    let conv = |specs: &mut Vec<_>, name: String, cin: usize, cout: usize| {
        specs.push((format!("{name}.weight"), vec![cout, cin, KERNEL_SIZE, KERNEL_SIZE], cin * 9));
        specs.push((format!("{name}.bias"), vec![cout], 0));
    };
    let mut cin = config.in_channels;
    for k in 0..config.depth {
        let f = config.filters(k);
        conv(&mut specs, format!("enc{k}.conv1"), cin, f);
        conv(&mut specs, format!("enc{k}.conv2"), f, f);
        cin = f;
    }
    let f = config.filters(config.depth);
    conv(&mut specs, "mid.conv1".into(), cin, f);
    conv(&mut specs, "mid.conv2".into(), f, f);
    for k in (0..config.depth).rev() {
        let f = config.filters(k);
        specs.push((format!("dec{k}.up.weight"), vec![2 * f, f, 2, 2], 2 * f));
        specs.push((format!("dec{k}.up.bias"), vec![f], 0));
        conv(&mut specs, format!("dec{k}.conv1"), 2 * f, f);
        conv(&mut specs, format!("dec{k}.conv2"), f, f);
    }
    specs.push(("head.weight".into(), vec![config.out_channels, config.head_inputs()], config.base_filters));
    specs.push(("head.bias".into(), vec![config.out_channels], 0));
    specs
}

impl Layout {
    fn new(config: &NetConfig) -> Self {
        let mut next = 0;
        let mut conv = || {
            let c = ConvIdx { weight: next, bias: next + 1 };
            next += 2;
            c
        };
        let encoder: Vec<LevelIdx> =
            (0..config.depth).map(|_| LevelIdx { conv1: conv(), conv2: conv() }).collect();
        let bottleneck = LevelIdx { conv1: conv(), conv2: conv() };
        let mut decoder: Vec<DecoderIdx> =
            (0..config.depth).map(|_| DecoderIdx { up: conv(), conv1: conv(), conv2: conv() }).collect();
        // stored deepest first
        decoder.reverse();
        let head = conv();
        Layout { encoder, bottleneck, decoder, head }
    }
}

/// Intermediate fields kept for the backward pass.
struct LevelCache<T> {
    input: Tensor<T>,
    act1: Tensor<T>,
    act2: Tensor<T>,
}

struct EncoderCache<T> {
    level: LevelCache<T>,
    pool_arg: Vec<u8>,
}

struct DecoderCache<T> {
    /// input of the transposed convolution
    below: Tensor<T>,
    level: LevelCache<T>,
}

struct ForwardCache<T> {
    encoder: Vec<EncoderCache<T>>,
    bottleneck: LevelCache<T>,
    decoder: Vec<DecoderCache<T>>,
    head_input: Tensor<T>,
}

/// Result of a forward pass.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    pub prediction: Tensor<T>,
    /// Field before the final convolution; the next frame's prior.
    pub penultimate: Tensor<T>,
}

/// Training target for one image; selects the loss.
#[derive(Clone, Debug)]
pub enum Target<T> {
    /// Weighted softmax cross-entropy.
    Classes(ClassMap),
    /// Two-headed angular loss.
    Angles(AngleMap<T>),
}

#[derive(Clone, Debug)]
pub struct Sample<T> {
    /// Single-channel image scaled to `[0, 1]`.
    pub image: Tensor<T>,
    pub target: Target<T>,
    pub weights: WeightMap<T>,
    /// Previous frame's penultimate field; `None` means a zero prior.
    pub prior: Option<Tensor<T>>,
}

#[derive(Clone, Debug)]
pub struct StepOutput<T> {
    /// Mean loss over the batch, before the update.
    pub loss: T,
    /// Penultimate field of each sample, in batch order.
    pub penultimates: Vec<Tensor<T>>,
}

/// Loss value and parameter gradients for a single sample.
pub struct SampleGradient<T> {
    pub loss: T,
    pub grads: Vec<Vec<T>>,
    pub penultimate: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    config: NetConfig,
    params: Vec<Param<T>>,
    adam: AdamState<T>,
}

impl<T: Scalar> Network<T> {
    /// Rectifier-aware initialization: weights ~ N(0, 2 / fan_in), zero biases.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params: Vec<Param<T>> = param_specs(&config)
            .into_iter()
            .map(|(name, dims, fan_in)| {
                let n: usize = dims.iter().product();
                let value = if fan_in == 0 {
                    vec![T::zero(); n]
                } else {
                    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                    (0..n).map(|_| T::of(normal.sample(&mut rng))).collect()
                };
                Param { name, dims, value }
            })
            .collect();
        if config.recurrent {
            // prior columns start at zero
            let head = params.iter_mut().find(|p| p.name == "head.weight").expect("head weight");
            let (b, k) = (config.base_filters, config.head_inputs());
            for row in head.value.chunks_mut(k) {
                row[b..].iter_mut().for_each(|v| *v = T::zero());
            }
        }
        let adam = AdamState::for_params(&params);
        Ok(Self { config, params, adam })
    }

    /// Assembles a network from stored parameters, checking every shape
    /// against the config.
    pub fn from_parts(config: NetConfig, params: Vec<Param<T>>, adam: AdamState<T>) -> Result<Self> {
        config.validate()?;
        let specs = param_specs(&config);
        if specs.len() != params.len() {
            return Err(Error::Shape(format!("{} tensors for a config expecting {}", params.len(), specs.len())));
        }
        for ((name, dims, _), p) in specs.iter().zip(&params) {
            if *name != p.name || *dims != p.dims || p.value.len() != dims.iter().product::<usize>() {
                return Err(Error::Shape(format!(
                    "tensor {} {:?} does not match expected {name} {dims:?}",
                    p.name, p.dims
                )));
            }
        }
        adam.check_against(&params)?;
        Ok(Self { config, params, adam })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn adam(&self) -> &AdamState<T> {
        &self.adam
    }

    pub fn param(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Flattened copy of all parameters in storage order.
    pub fn flat_params(&self) -> Vec<T> {
        self.params.iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!("{} values for {} parameters", flat.len(), self.param_count())));
        }
        let mut offset = 0;
        for p in &mut self.params {
            let n = p.value.len();
            p.value.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn check_input(&self, image: &Tensor<T>, prior: Option<&Tensor<T>>) -> Result<()> {
        let m = self.config.size_multiple();
        if image.channels != self.config.in_channels {
            return Err(Error::Shape(format!(
                "image has {} channels, network expects {}",
                image.channels, self.config.in_channels
            )));
        }
        if image.height == 0 || image.width == 0 || image.height % m != 0 || image.width % m != 0 {
            return Err(Error::Shape(format!(
                "image {}x{} is not a positive multiple of {m}",
                image.width, image.height
            )));
        }
        if let (true, Some(p)) = (self.config.recurrent, prior) {
            if p.shape() != (self.config.base_filters, image.height, image.width) {
                return Err(Error::Shape(format!("prior {:?} does not match the penultimate layer", p.shape())));
            }
        }
        Ok(())
    }

    fn level_forward(&self, idx: LevelIdx, input: Tensor<T>, scratch: &mut Vec<T>) -> LevelCache<T> {
        let p = &self.params;
        let mut act1 = ops::conv3x3(&input, &p[idx.conv1.weight].value, &p[idx.conv1.bias].value, scratch);
        ops::relu_in_place(&mut act1);
        let mut act2 = ops::conv3x3(&act1, &p[idx.conv2.weight].value, &p[idx.conv2.bias].value, scratch);
        ops::relu_in_place(&mut act2);
        LevelCache { input, act1, act2 }
    }

    fn forward_cached(&self, image: &Tensor<T>, prior: Option<&Tensor<T>>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(image, prior)?;
        let layout = Layout::new(&self.config);
        let p = &self.params;
        let mut scratch = Vec::new();

        let mut encoder = Vec::with_capacity(self.config.depth);
        let mut x = image.clone();
        for &idx in &layout.encoder {
            let level = self.level_forward(idx, x, &mut scratch);
            let (pooled, pool_arg) = ops::maxpool2(&level.act2);
            x = pooled;
            encoder.push(EncoderCache { level, pool_arg });
        }
        let bottleneck = self.level_forward(layout.bottleneck, x, &mut scratch);

        let mut below = bottleneck.act2.clone();
        let mut decoder: Vec<Option<DecoderCache<T>>> = (0..self.config.depth).map(|_| None).collect();
        for k in (0..self.config.depth).rev() {
            let idx = layout.decoder[k];
            let up = ops::upconv2(&below, &p[idx.up.weight].value, &p[idx.up.bias].value, &mut scratch);
            let joined = encoder[k].level.act2.concat(&up)?;
            let level = self.level_forward(LevelIdx { conv1: idx.conv1, conv2: idx.conv2 }, joined, &mut scratch);
            let next = level.act2.clone();
            decoder[k] = Some(DecoderCache { below, level });
            below = next;
        }
        let penultimate = below;
        let head_input = if self.config.recurrent {
            match prior {
                Some(prior) => penultimate.concat(prior)?,
                None => penultimate.concat(&Tensor::zeros(penultimate.channels, penultimate.height, penultimate.width))?,
            }
        } else {
            penultimate
        };
        let mut out = ops::conv1x1(&head_input, &p[layout.head.weight].value, &p[layout.head.bias].value);
        if let Some(c) = self.config.angle_channel() {
            let gain = T::of(ANGLE_OUTPUT_GAIN);
            out.channel_mut(c).iter_mut().for_each(|v| *v *= gain);
        }
        let decoder = decoder.into_iter().map(|d| d.expect("every level visited")).collect();
        Ok((out, ForwardCache { encoder, bottleneck, decoder, head_input }))
    }

    fn penultimate_of(&self, cache: &ForwardCache<T>) -> Tensor<T> {
        cache.decoder[0].level.act2.clone()
    }

    /// Runs the network. For recurrent configs a missing prior is a zero
    /// field; non-recurrent configs ignore the prior.
    pub fn forward(&self, image: &Tensor<T>, prior: Option<&Tensor<T>>) -> Result<Forward<T>> {
        let (prediction, cache) = self.forward_cached(image, prior)?;
        Ok(Forward { prediction, penultimate: self.penultimate_of(&cache) })
    }

    fn level_backward(
        &self,
        idx: LevelIdx,
        cache: &LevelCache<T>,
        mut grad: Tensor<T>,
        grads: &mut [Vec<T>],
        need_input_grad: bool,
        scratch: &mut Vec<T>,
    ) -> Option<Tensor<T>> {
        let p = &self.params;
        ops::relu_backward(&cache.act2, &mut grad);
        let (dw, db) = pair_mut(grads, idx.conv2.weight, idx.conv2.bias);
        let mut g1 = ops::conv3x3_backward(&cache.act1, &p[idx.conv2.weight].value, &grad, dw, db, true, scratch)
            .expect("requested");
        ops::relu_backward(&cache.act1, &mut g1);
        let (dw, db) = pair_mut(grads, idx.conv1.weight, idx.conv1.bias);
        ops::conv3x3_backward(&cache.input, &p[idx.conv1.weight].value, &g1, dw, db, need_input_grad, scratch)
    }

    /// Gradient of all parameters given the gradient of the prediction.
    /// The prior is treated as a constant.
    fn backward(&self, cache: &ForwardCache<T>, dprediction: &Tensor<T>) -> Vec<Vec<T>> {
        let layout = Layout::new(&self.config);
        let p = &self.params;
        let mut grads: Vec<Vec<T>> = p.iter().map(|q| vec![T::zero(); q.value.len()]).collect();
        let mut scratch = Vec::new();

        let mut dz = dprediction.clone();
        if let Some(c) = self.config.angle_channel() {
            let gain = T::of(ANGLE_OUTPUT_GAIN);
            dz.channel_mut(c).iter_mut().for_each(|g| *g *= gain);
        }
        let (dw, db) = pair_mut(&mut grads, layout.head.weight, layout.head.bias);
        let dhead = ops::conv1x1_backward(&cache.head_input, &p[layout.head.weight].value, &dz, dw, db);
        let b = self.config.base_filters;
        let plane = dhead.plane();
        let mut grad = Tensor::from_vec(b, dhead.height, dhead.width, dhead.data[..b * plane].to_vec())
            .expect("penultimate slice");

        let mut skip_grads: Vec<Tensor<T>> = Vec::with_capacity(self.config.depth);
        for k in 0..self.config.depth {
            let idx = layout.decoder[k];
            let dc = &cache.decoder[k];
            let level = LevelIdx { conv1: idx.conv1, conv2: idx.conv2 };
            let djoined = self
                .level_backward(level, &dc.level, grad, &mut grads, true, &mut scratch)
                .expect("requested");
            let f = self.config.filters(k);
            let split = f * djoined.plane();
            let (dskip, dup) = djoined.data.split_at(split);
            skip_grads.push(Tensor::from_vec(f, djoined.height, djoined.width, dskip.to_vec()).expect("skip"));
            let dup = Tensor::from_vec(f, djoined.height, djoined.width, dup.to_vec()).expect("up");
            let (dw, db) = pair_mut(&mut grads, idx.up.weight, idx.up.bias);
            grad = ops::upconv2_backward(&dc.below, &p[idx.up.weight].value, &dup, dw, db, &mut scratch);
        }

        grad = self
            .level_backward(layout.bottleneck, &cache.bottleneck, grad, &mut grads, true, &mut scratch)
            .expect("requested");
        for k in (0..self.config.depth).rev() {
            let ec = &cache.encoder[k];
            let mut dact = skip_grads.pop().expect("one skip per level");
            ops::maxpool2_backward(&grad, &ec.pool_arg, &mut dact);
            let need = k > 0;
            match self.level_backward(layout.encoder[k], &ec.level, dact, &mut grads, need, &mut scratch) {
                Some(g) => grad = g,
                None => break,
            }
        }
        grads
    }

    fn sample_loss_of(&self, prediction: &Tensor<T>, sample: &Sample<T>) -> Result<losses::LossResult<T>> {
        let result = match &sample.target {
            Target::Classes(classes) => {
                if self.config.out_channels != 3 {
                    return Err(Error::Shape("class targets need a 3-channel network".into()));
                }
                losses::weighted_softmax_ce(prediction, classes, &sample.weights)?
            }
            Target::Angles(angles) => {
                if !self.config.is_orientation() {
                    return Err(Error::Shape("angle targets need a 2-channel network".into()));
                }
                losses::angular_sine_loss(prediction, angles, &sample.weights)?
            }
        };
        if !result.loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {:?}", result.loss)));
        }
        Ok(result)
    }

    /// Loss and penultimate field for one sample, forward pass only.
    pub fn sample_loss(&self, sample: &Sample<T>) -> Result<(T, Tensor<T>)> {
        let (prediction, cache) = self.forward_cached(&sample.image, sample.prior.as_ref())?;
        let result = self.sample_loss_of(&prediction, sample)?;
        Ok((result.loss, self.penultimate_of(&cache)))
    }

    /// Loss, gradients and penultimate field for one sample, without
    /// touching the parameters.
    pub fn sample_gradient(&self, sample: &Sample<T>) -> Result<SampleGradient<T>> {
        let (prediction, cache) = self.forward_cached(&sample.image, sample.prior.as_ref())?;
        let result = self.sample_loss_of(&prediction, sample)?;
        let grads = self.backward(&cache, &result.gradient);
        Ok(SampleGradient { loss: result.loss, grads, penultimate: self.penultimate_of(&cache) })
    }

    /// One Adam step on the mean loss of `batch`. Samples are processed in
    /// parallel and their gradients summed in batch order, so the result
    /// does not depend on the thread count.
    pub fn train_step(&mut self, batch: &[Sample<T>], learning_rate: T) -> Result<StepOutput<T>> {
        if batch.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        let results: Vec<SampleGradient<T>> =
            batch.par_iter().map(|s| self.sample_gradient(s)).collect::<Result<_>>()?;
        let scale = T::one() / T::of(batch.len() as f64);
        let mut total: Vec<Vec<T>> = self.params.iter().map(|p| vec![T::zero(); p.value.len()]).collect();
        let mut loss = T::zero();
        let mut penultimates = Vec::with_capacity(batch.len());
        for r in results {
            loss += r.loss;
            for (acc, g) in total.iter_mut().zip(&r.grads) {
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += *b;
                }
            }
            penultimates.push(r.penultimate);
        }
        for g in total.iter_mut().flatten() {
            *g *= scale;
        }
        self.adam.update(&mut self.params, &total, learning_rate);
        Ok(StepOutput { loss: loss * scale, penultimates })
    }

    /// Predicts a time-ordered sequence, chaining each frame's penultimate
    /// field into the next frame as its prior (zero for the first frame).
    pub fn predict_sequence(&self, frames: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let mut prior: Option<Tensor<T>> = None;
        let mut out = Vec::with_capacity(frames.len());
        for frame in frames {
            let f = self.forward(frame, prior.as_ref())?;
            if self.config.recurrent {
                prior = Some(f.penultimate);
            }
            out.push(f.prediction);
        }
        Ok(out)
    }
}

fn pair_mut<T>(v: &mut [Vec<T>], a: usize, b: usize) -> (&mut [T], &mut [T]) {
    debug_assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

/// Scales 8-bit gray levels into a `[0, 1]` single-channel tensor.
pub fn image_tensor<T: Scalar>(pixels: &crate::grid::Grid<u8>) -> Tensor<T> {
    let inv = 1.0 / 255.0;
    Tensor::from_vec(
        1,
        pixels.height(),
        pixels.width(),
        pixels.data().iter().map(|&v| T::of(v as f64 * inv)).collect(),
    )
    .expect("grid shape")
}
