//! Adaptive-moment optimizer with decoupled weight decay.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::EncoderParams;
use crate::error::{invalid, Error, Result};
use crate::tensor::Real;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment accumulators mirroring the parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
    pub step: u64,
}

impl<T> Default for OptimizerState<T> {
    fn default() -> Self {
        Self { first: Vec::new(), second: Vec::new(), step: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW<T> {
    pub lr: f64,
    pub weight_decay: f64,
    pub state: OptimizerState<T>,
}

impl<T: Real> AdamW<T> {
    pub fn new(lr: f64, weight_decay: f64) -> Result<Self> {
        if lr.is_nan() || lr < 0.0 || weight_decay.is_nan() || weight_decay < 0.0 {
            return Err(invalid("learning rate and weight decay must be non-negative"));
        }
        Ok(Self { lr, weight_decay, state: OptimizerState::default() })
    }

    /// One update over `(name, parameter, gradient)` triples. Nothing is
    /// modified if any gradient is non-finite.
    pub fn update(&mut self, mut tensors: Vec<(String, &mut [T], &[T])>) -> Result<()> {
        if let Some((name, _, _)) = tensors.iter().find(|(_, _, g)| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
        if self.state.first.is_empty() {
            self.state.first = tensors.iter().map(|(_, p, _)| vec![T::zero(); p.len()]).collect();
            self.state.second = self.state.first.clone();
        }
        if self.state.first.len() != tensors.len()
            || tensors.iter().zip(&self.state.first).any(|((_, p, g), m)| p.len() != m.len() || g.len() != m.len())
        {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        self.state.step += 1;
        let t = self.state.step as i32;
        let (b1, b2) = (T::of(BETA1), T::of(BETA2));
        let bias1 = T::one() - b1.powi(t);
        let bias2 = T::one() - b2.powi(t);
        let lr = T::of(self.lr);
        let decay = T::one() - lr * T::of(self.weight_decay);
        let eps = T::of(EPSILON);
        for ((_, param, grad), (m, v)) in
            tensors.iter_mut().zip(self.state.first.iter_mut().zip(self.state.second.iter_mut()))
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                param[i] = param[i] * decay - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut EncoderParams<T>, grads: &EncoderParams<T>) -> Result<()> {
        let g = grads.tensors();
        let triples = params
            .tensors_mut()
            .into_iter()
            .zip(g)
            .map(|((name, p), (_, g))| (name, p.as_mut_slice(), g.as_slice()))
            .collect();
        self.update(triples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut opt = AdamW::<f64>::new(0.1, 0.0).unwrap();
        let mut p = vec![1.5, -2.0];
        let g = vec![0.0, 0.0];
        opt.update(vec![("w".to_string(), &mut p, &g)]).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        let mut opt = AdamW::<f64>::new(0.1, 0.0).unwrap();
        let mut p = vec![0.0];
        opt.update(vec![("w".to_string(), &mut p, &[1.0])]).unwrap();
        let expected = -0.1 / (1.0 + EPSILON);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn decay_is_decoupled_from_moments() {
        let mut opt = AdamW::<f64>::new(0.1, 0.5).unwrap();
        let mut p = vec![2.0];
        opt.update(vec![("w".to_string(), &mut p, &[0.0])]).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut opt = AdamW::<f32>::new(0.1, 0.0).unwrap();
        let mut a = vec![1.0f32];
        let mut b = vec![1.0f32];
        let err = opt
            .update(vec![("a".to_string(), &mut a, &[0.5]), ("b".to_string(), &mut b, &[f32::NAN])])
            .unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient("b".into()));
        assert_eq!((a[0], b[0], opt.state.step), (1.0, 1.0, 0));
    }
}
