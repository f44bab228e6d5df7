//! Adaptive moment estimation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Param;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment estimates per parameter tensor plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn for_params(params: &[Param<T>]) -> Self {
        let zeros = || params.iter().map(|p| vec![T::zero(); p.value.len()]).collect();
        Self { m: zeros(), v: zeros(), step: 0 }
    }

    pub(crate) fn check_against(&self, params: &[Param<T>]) -> Result<()> {
        let ok = self.m.len() == params.len()
            && self.v.len() == params.len()
            && params
                .iter()
                .zip(self.m.iter().zip(&self.v))
                .all(|(p, (m, v))| m.len() == p.value.len() && v.len() == p.value.len());
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("optimizer state does not match parameters".into()))
        }
    }

    pub fn update(&mut self, params: &mut [Param<T>], grads: &[Vec<T>], lr: T) {
        self.step += 1;
        let (b1, b2, eps) = (T::of(BETA1), T::of(BETA2), T::of(EPSILON));
        let t = self.step as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p.value[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = vec![Param { name: "w".into(), dims: vec![2], value: vec![1.0f64, -1.0] }];
        let mut adam = AdamState::for_params(&params);
        adam.update(&mut params, &[vec![0.5, -3.0]], 0.1);
        // bias-corrected first step is lr * sign(g)
        assert!((params[0].value[0] - 0.9).abs() < 1e-6);
        assert!((params[0].value[1] + 0.9).abs() < 1e-6);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut params = vec![Param { name: "x".into(), dims: vec![1], value: vec![5.0f64] }];
        let mut adam = AdamState::for_params(&params);
        for _ in 0..2000 {
            let g = 2.0 * (params[0].value[0] - 2.0);
            adam.update(&mut params, &[vec![g]], 0.05);
        }
        assert!((params[0].value[0] - 2.0).abs() < 1e-3);
    }
}
