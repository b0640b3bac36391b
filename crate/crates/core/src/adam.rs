//! ADAM with bias correction and per-parameter learning rates.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, params: AdamParams) -> Self {
        Self { params, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    /// One update of `x` along `grad`, with `lr(i)` the rate of parameter `i`.
    pub fn step_with(&mut self, x: &mut [f64], grad: &[f64], lr: impl Fn(usize) -> f64) {
        debug_assert_eq!(x.len(), self.m.len());
        debug_assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let AdamParams { beta1, beta2, epsilon } = self.params;
        let c1 = 1.0 - libm::pow(beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(beta2, self.t as f64);
        for i in 0..x.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            x[i] -= lr(i) * m_hat / (libm::sqrt(v_hat) + epsilon);
        }
    }

    pub fn step(&mut self, x: &mut [f64], grad: &[f64], lr: f64) {
        self.step_with(x, grad, |_| lr);
    }
}
