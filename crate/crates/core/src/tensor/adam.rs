use serde::{Deserialize, Serialize};

use super::ParamSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam with one pair of moment buffers per parameter.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let first: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Adam {
            config,
            step: 0,
            second: first.clone(),
            first,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated grads, then zeroes them.
    pub fn step(&mut self, params: &mut ParamSet) {
        assert_eq!(self.first.len(), params.len(), "optimizer built for a different parameter set");
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grad = p.grad.data();
            let value = p.value.data_mut();
            for i in 0..value.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                value[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        params.zero_grads();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn single(value: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::scalar(value)).unwrap();
        ps
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut ps = single(0.7);
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        for _ in 0..3 {
            adam.step(&mut ps);
        }
        assert_eq!(ps.by_name("w").unwrap().value.data()[0], 0.7);
        assert_eq!(adam.steps(), 3);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g and v_hat = g^2 after one step, so the update is
        // lr * g / (|g| + eps).
        for g in [0.5, -3.0, 1e-3] {
            let mut ps = single(0.0);
            let mut adam = Adam::new(AdamConfig::default(), &ps);
            ps.iter_mut().next().unwrap().grad = Tensor::scalar(g);
            adam.step(&mut ps);
            let expected = -0.001 * g / (g.abs() + 1e-8);
            let got = ps.by_name("w").unwrap().value.data()[0];
            assert!((got - expected).abs() < 1e-15, "g={g}: {got} vs {expected}");
        }
    }

    #[test]
    fn constant_gradient_second_update_not_larger() {
        // Hand-iterated recurrence for g = 1:
        // step 1: m=0.1, v=0.001 -> m_hat=1, v_hat=1 -> du = lr/(1+eps)
        // step 2: m=0.19, v=0.001999 -> m_hat=1, v_hat=1 -> du = lr/(1+eps)
        let mut ps = single(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        let mut positions = vec![0.0];
        for _ in 0..2 {
            ps.iter_mut().next().unwrap().grad = Tensor::scalar(1.0);
            adam.step(&mut ps);
            positions.push(ps.by_name("w").unwrap().value.data()[0]);
        }
        let first = (positions[1] - positions[0]).abs();
        let second = (positions[2] - positions[1]).abs();
        assert!(second <= first + 1e-18);
        assert!((first - 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn grads_are_zeroed_after_step() {
        let mut ps = single(1.0);
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        ps.iter_mut().next().unwrap().grad = Tensor::scalar(2.0);
        adam.step(&mut ps);
        assert_eq!(ps.by_name("w").unwrap().grad.data()[0], 0.0);
    }
}
