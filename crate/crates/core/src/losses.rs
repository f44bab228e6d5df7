//! Training objectives with analytic gradients.
//!
//! * [`weighted_softmax_ce`]: weighted 3-class softmax cross-entropy for
//!   segmentation.
//! * [`angular_sine_loss`]: two-headed orientation objective. Head A is a
//!   weighted binary cross-entropy on a foreground logit; head B is
//!   `w * sin^2(pi * (a - a_hat) / 360)` on foreground pixels, which is zero
//!   exactly at multiples of 360 degrees and peaks at 180.

use crate::error::{Error, Result};
use crate::grid::{Grid, Tensor};
use crate::labelgen::{AngleMap, ClassMap, WeightMap};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct LossResult<T> {
    pub loss: T,
    /// Same shape as the prediction.
    pub gradient: Tensor<T>,
}

/// Output channel layout of an orientation prediction.
pub const FG_CHANNEL: usize = 0;
pub const ANGLE_CHANNEL: usize = 1;

fn check_shape<T, U, V>(pred: &Tensor<T>, channels: usize, target: &Grid<U>, weights: &Grid<V>) -> Result<()> {
    if pred.channels != channels {
        return Err(Error::Shape(format!("expected {channels} channels, got {}", pred.channels)));
    }
    if pred.width != target.width() || pred.height != target.height() || !target.same_shape(weights) {
        return Err(Error::Shape(format!(
            "prediction {}x{}, target {}x{}, weights {}x{}",
            pred.width,
            pred.height,
            target.width(),
            target.height(),
            weights.width(),
            weights.height()
        )));
    }
    Ok(())
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("non-finite prediction at index {i}"))),
        None => Ok(()),
    }
}

/// `(1/N) * sum_p w(p) * -log softmax(logits(p))[target(p)]`.
pub fn weighted_softmax_ce<T: Scalar>(
    logits: &Tensor<T>,
    target: &ClassMap,
    weights: &WeightMap<T>,
) -> Result<LossResult<T>> {
    const CLASSES: usize = 3;
    check_shape(logits, CLASSES, target, weights)?;
    check_finite(&logits.data)?;
    let plane = logits.plane();
    let inv_n = T::one() / T::of(plane as f64);
    let mut gradient = Tensor::zeros(CLASSES, logits.height, logits.width);
    let mut total = T::zero();
    for p in 0..plane {
        let z = [logits.data[p], logits.data[plane + p], logits.data[2 * plane + p]];
        let m = z[0].max(z[1]).max(z[2]);
        let e = [(z[0] - m).exp(), (z[1] - m).exp(), (z[2] - m).exp()];
        let s = e[0] + e[1] + e[2];
        let t = target.data()[p] as usize;
        if t >= CLASSES {
            return Err(Error::Data(format!("class {t} at pixel {p}")));
        }
        let w = weights.data()[p];
        total += w * (s.ln() - (z[t] - m));
        for c in 0..CLASSES {
            let onehot = if c == t { T::one() } else { T::zero() };
            gradient.data[c * plane + p] = w * inv_n * (e[c] / s - onehot);
        }
    }
    Ok(LossResult { loss: total * inv_n, gradient })
}

/// `softplus(z) - y * z`, the numerically stable binary cross-entropy on a logit.
fn bce_logit<T: Scalar>(z: T, y: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p() - y * z
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Head B value for a degree difference.
pub fn angle_penalty<T: Scalar>(delta_deg: T) -> T {
    let s = (T::PI() * delta_deg / T::of(360.0)).sin();
    s * s
}

/// Two-headed orientation loss over a 2-channel prediction
/// (`[FG_CHANNEL, ANGLE_CHANNEL]`).
///
/// Total = mean over all pixels of head A + mean over foreground pixels of
/// head B. Foreground is where the target angle differs from -1.
pub fn angular_sine_loss<T: Scalar>(
    pred: &Tensor<T>,
    target: &AngleMap<T>,
    weights: &WeightMap<T>,
) -> Result<LossResult<T>> {
    check_shape(pred, 2, target, weights)?;
    check_finite(&pred.data)?;
    let plane = pred.plane();
    let inv_n = T::one() / T::of(plane as f64);
    let background = T::of(crate::labelgen::BACKGROUND_ANGLE);
    let foreground = target.data().iter().filter(|&&v| v != background).count();
    let inv_fg = if foreground > 0 { T::one() / T::of(foreground as f64) } else { T::zero() };
    let half_rad = T::PI() / T::of(360.0);
    let rad = T::PI() / T::of(180.0);

    let mut gradient = Tensor::zeros(2, pred.height, pred.width);
    let (mut head_a, mut head_b) = (T::zero(), T::zero());
    for p in 0..plane {
        let w = weights.data()[p];
        let label = target.data()[p];
        let is_fg = label != background;
        let y = if is_fg { T::one() } else { T::zero() };
        let z = pred.data[FG_CHANNEL * plane + p];
        head_a += w * bce_logit(z, y);
        gradient.data[FG_CHANNEL * plane + p] = w * inv_n * (sigmoid(z) - y);
        if is_fg {
            let delta = pred.data[ANGLE_CHANNEL * plane + p] - label;
            head_b += w * angle_penalty(delta);
            // d/da sin^2(pi a / 360) = (pi / 360) sin(pi a / 180)
            gradient.data[ANGLE_CHANNEL * plane + p] = w * inv_fg * half_rad * (rad * delta).sin();
        }
    }
    Ok(LossResult { loss: head_a * inv_n + head_b * inv_fg, gradient })
}

/// Largest relative disagreement between an analytic gradient and central
/// differences, over the sampled coordinates.
///
/// `loss` maps an input vector to `(value, gradient)`. The relative error
/// per coordinate is `|g - n| / max(|g|, |n|, 1e-8)`.
pub fn finite_difference_check<T, F>(
    mut loss: F,
    inputs: &[T],
    epsilon: T,
    coords: impl IntoIterator<Item = usize>,
) -> Result<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    if !(epsilon >= T::of(1e-6) && epsilon <= T::of(1e-2)) {
        return Err(Error::Invalid(format!("epsilon {epsilon:?} outside [1e-6, 1e-2]")));
    }
    let (_, analytic) = loss(inputs)?;
    if analytic.len() != inputs.len() {
        return Err(Error::Shape(format!("gradient has {} entries for {} inputs", analytic.len(), inputs.len())));
    }
    let floor = T::of(1e-8);
    let mut x = inputs.to_vec();
    let mut worst = T::zero();
    for i in coords {
        let orig = x[i];
        x[i] = orig + epsilon;
        let (up, _) = loss(&x)?;
        x[i] = orig - epsilon;
        let (down, _) = loss(&x)?;
        x[i] = orig;
        let numeric = (up - down) / (epsilon + epsilon);
        let g = analytic[i];
        let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_logits(h: usize, w: usize, z: [f64; 3]) -> Tensor<f64> {
        let mut t = Tensor::zeros(3, h, w);
        for c in 0..3 {
            t.channel_mut(c).fill(z[c]);
        }
        t
    }

    #[test]
    fn confident_correct_prediction_is_nearly_free() {
        let logits = uniform_logits(4, 4, [10.0, -10.0, -10.0]);
        let target = Grid::filled(4, 4, 0u8);
        let w = Grid::filled(4, 4, 1.0);
        let r = weighted_softmax_ce(&logits, &target, &w).unwrap();
        let expect = (1.0 + 2.0 * (-20.0f64).exp()).ln();
        assert!((r.loss - expect).abs() < 1e-15);
        assert!(r.loss > 4.0e-9 && r.loss < 4.2e-9);
        assert!(r.gradient.data.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn uniform_logits_cost_ln3() {
        let r = weighted_softmax_ce(&uniform_logits(3, 5, [0.7; 3]), &Grid::filled(5, 3, 1u8), &Grid::filled(5, 3, 1.0))
            .unwrap();
        assert!((r.loss - 3f64.ln()).abs() < 1e-12);
    }

    fn random_seg(seed: u64, h: usize, w: usize) -> (Tensor<f64>, ClassMap, WeightMap<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = Tensor::from_vec(3, h, w, (0..3 * h * w).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let target = Grid::from_vec(w, h, (0..h * w).map(|_| rng.random_range(0..3u8)).collect()).unwrap();
        let weights = Grid::from_vec(w, h, (0..h * w).map(|_| rng.random_range(1.0..20.0)).collect()).unwrap();
        (logits, target, weights)
    }

    fn random_angle(seed: u64, h: usize, w: usize) -> (Tensor<f64>, AngleMap<f64>, WeightMap<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pred = Tensor::zeros(2, h, w);
        for v in pred.channel_mut(0) {
            *v = rng.random_range(-3.0..3.0);
        }
        for v in pred.channel_mut(1) {
            *v = rng.random_range(-100.0..460.0);
        }
        let target = Grid::from_vec(
            w,
            h,
            (0..h * w).map(|_| if rng.random_bool(0.4) { -1.0 } else { rng.random_range(0.0..360.0) }).collect(),
        )
        .unwrap();
        let weights = Grid::from_vec(w, h, (0..h * w).map(|_| rng.random_range(1.0..20.0)).collect()).unwrap();
        (pred, target, weights)
    }

    #[test]
    fn weights_scale_linearly() {
        let (logits, target, weights) = random_seg(1, 6, 7);
        let a = weighted_softmax_ce(&logits, &target, &weights).unwrap();
        let b = weighted_softmax_ce(&logits, &target, &weights.map(|w| w * 2.0)).unwrap();
        assert_eq!(b.loss, 2.0 * a.loss);
        for (x, y) in a.gradient.data.iter().zip(&b.gradient.data) {
            assert_eq!(*y, 2.0 * x);
        }
        let (pred, target, weights) = random_angle(2, 6, 7);
        let a = angular_sine_loss(&pred, &target, &weights).unwrap();
        let b = angular_sine_loss(&pred, &target, &weights.map(|w| w * 3.5)).unwrap();
        assert!((b.loss - 3.5 * a.loss).abs() < 1e-12 * b.loss);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (mut logits, target, weights) = random_seg(3, 4, 4);
        assert!(matches!(
            weighted_softmax_ce(&logits, &Grid::filled(5, 4, 0u8), &weights),
            Err(Error::Shape(_))
        ));
        logits.data[5] = f64::NAN;
        assert!(matches!(weighted_softmax_ce(&logits, &target, &weights), Err(Error::Numeric(_))));
        let (mut pred, target, weights) = random_angle(3, 4, 4);
        pred.data[20] = f64::INFINITY;
        assert!(matches!(angular_sine_loss(&pred, &target, &weights), Err(Error::Numeric(_))));
    }

    #[test]
    fn angle_penalty_shape() {
        assert_eq!(angle_penalty(0.0f64), 0.0);
        assert!((angle_penalty(180.0f64) - 1.0).abs() < 1e-15);
        assert!(angle_penalty(360.0f64) < 1e-30);
        assert!((angle_penalty(-90.0f64) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn head_b_is_periodic() {
        let (pred, target, weights) = random_angle(4, 5, 5);
        let mut shifted = pred.clone();
        for v in shifted.channel_mut(ANGLE_CHANNEL) {
            *v += 360.0;
        }
        let a = angular_sine_loss(&pred, &target, &weights).unwrap();
        let b = angular_sine_loss(&shifted, &target, &weights).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-10);
    }

    #[test]
    fn head_b_maximum_and_zero() {
        // single foreground pixel, fg logit saturated so head A is ~0
        let target = Grid::from_vec(1, 1, vec![30.0]).unwrap();
        let w = Grid::filled(1, 1, 1.0);
        let at = |angle: f64| {
            let pred = Tensor::from_vec(2, 1, 1, vec![60.0, angle]).unwrap();
            angular_sine_loss(&pred, &target, &w).unwrap().loss
        };
        assert!(at(30.0) < 1e-20);
        assert!((at(210.0) - 1.0).abs() < 1e-12);
        assert!(at(390.0) < 1e-20);
    }

    #[test]
    fn all_background_has_no_angle_term() {
        let target = Grid::filled(2, 2, -1.0);
        let pred = Tensor::from_vec(2, 2, 2, vec![-50.0, -50.0, -50.0, -50.0, 10.0, 20.0, 30.0, 40.0]).unwrap();
        let r = angular_sine_loss(&pred, &target, &Grid::filled(2, 2, 1.0)).unwrap();
        assert!(r.loss < 1e-20);
        assert!(r.gradient.channel(ANGLE_CHANNEL).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn softmax_gradient_matches_central_differences() {
        let (logits, target, weights) = random_seg(5, 8, 8);
        let err = finite_difference_check(
            |x: &[f64]| {
                let t = Tensor::from_vec(3, 8, 8, x.to_vec())?;
                let r = weighted_softmax_ce(&t, &target, &weights)?;
                Ok((r.loss, r.gradient.data))
            },
            &logits.data,
            1e-4,
            0..logits.data.len(),
        )
        .unwrap();
        assert!(err < 1e-3, "relative error {err}");
    }

    #[test]
    fn angular_gradient_matches_central_differences() {
        let (pred, target, weights) = random_angle(6, 8, 8);
        let err = finite_difference_check(
            |x: &[f64]| {
                let t = Tensor::from_vec(2, 8, 8, x.to_vec())?;
                let r = angular_sine_loss(&t, &target, &weights)?;
                Ok((r.loss, r.gradient.data))
            },
            &pred.data,
            1e-4,
            0..pred.data.len(),
        )
        .unwrap();
        assert!(err < 1e-3, "relative error {err}");
    }

    #[test]
    fn linear_loss_is_exact() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let err =
            finite_difference_check(|x: &[f64]| Ok((x.iter().sum(), vec![1.0; x.len()])), &x, 1e-3, 0..10).unwrap();
        assert!(err < 1e-6);
        assert!(finite_difference_check(|x: &[f64]| Ok((x[0], vec![1.0])), &[0.0], 0.5, [0]).is_err());
    }
}
