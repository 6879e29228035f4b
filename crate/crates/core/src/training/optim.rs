use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept in f64 regardless of `S`.
#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, params: AdamParams) -> Self {
        Self {
            params,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step<S: Scalar>(&mut self, weights: &mut [S], grad: &[S]) {
        let AdamParams { beta1, beta2, eps } = self.params;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        for (((w, &g), m), v) in weights.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            let g = g.as_f64();
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let update = self.lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            *w -= S::lit(update);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = vec![1.0f64, -1.0, 0.5];
        let mut opt = Adam::new(3, 0.1, AdamParams::default());
        opt.step(&mut w, &[2.0, -3.0, 0.0]);
        assert!((w[0] - 0.9).abs() < 1e-6);
        assert!((w[1] + 0.9).abs() < 1e-6);
        assert_eq!(w[2], 0.5);
    }

    #[test]
    fn minimises_quadratic() {
        let mut w = vec![3.0f64];
        let mut opt = Adam::new(1, 0.05, AdamParams::default());
        for _ in 0..2000 {
            let g = [2.0 * (w[0] - 1.0)];
            opt.step(&mut w, &g);
        }
        assert!((w[0] - 1.0).abs() < 1e-3);
    }
}
