//! Dense layers with hand-written reverse-mode gradients, plus Adam.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fully connected layer, weights stored (out, in).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn xavier(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-bound..bound));
        Linear {
            w,
            b: Array1::zeros(out_dim),
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            w: Array2::zeros((out_dim, in_dim)),
            b: Array1::zeros(out_dim),
        }
    }

    /// x: (batch, in) -> (batch, out).
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(
        &self,
        x: &Array2<f64>,
        grad_out: &Array2<f64>,
        grad: &mut Linear,
    ) -> Array2<f64> {
        grad.w += &grad_out.t().dot(x);
        grad.b += &grad_out.sum_axis(Axis(0));
        grad_out.dot(&self.w)
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn push_flat(&self, out: &mut Vec<f64>) {
        out.extend(self.w.iter());
        out.extend(self.b.iter());
    }

    pub fn load_flat(&mut self, data: &[f64], pos: &mut usize) {
        for v in self.w.iter_mut() {
            *v = data[*pos];
            *pos += 1;
        }
        for v in self.b.iter_mut() {
            *v = data[*pos];
            *pos += 1;
        }
    }
}

pub fn tanh(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(f64::tanh)
}

/// Gradient through tanh given its output y: dx = dy * (1 - y^2).
pub fn tanh_backward(y: &Array2<f64>, grad_out: &Array2<f64>) -> Array2<f64> {
    grad_out * &y.mapv(|v| 1.0 - v * v)
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        let ones = vec![1.0; params.len()];
        self.step_with_multiplier(params, grads, &ones);
    }

    /// Adam step with a per-parameter learning-rate multiplier.
    pub fn step_with_multiplier(&mut self, params: &mut [f64], grads: &[f64], mult: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), mult.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.lr * mult[i] * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn linear_forward_matches_hand_computation() {
        let l = Linear {
            w: array![[1.0, 2.0], [3.0, 4.0]],
            b: array![0.5, -0.5],
        };
        let x = array![[1.0, 1.0]];
        let y = l.forward(&x);
        assert_eq!(y, array![[3.5, 6.5]]);
    }

    #[test]
    fn linear_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = Linear::xavier(3, 2, &mut rng);
        let x = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        // Scalar loss: sum of outputs.
        let mut grad = Linear::zeros(3, 2);
        let ones = Array2::ones((4, 2));
        let gx = l.backward(&x, &ones, &mut grad);

        let h = 1e-6;
        for i in 0..2 {
            for j in 0..3 {
                let mut lp = l.clone();
                lp.w[[i, j]] += h;
                let mut lm = l.clone();
                lm.w[[i, j]] -= h;
                let fd = (lp.forward(&x).sum() - lm.forward(&x).sum()) / (2.0 * h);
                assert!((grad.w[[i, j]] - fd).abs() < 1e-6);
            }
        }
        // Input gradient via finite differences on one entry.
        let mut xp = x.clone();
        xp[[0, 0]] += h;
        let mut xm = x.clone();
        xm[[0, 0]] -= h;
        let fd = (l.forward(&xp).sum() - l.forward(&xm).sum()) / (2.0 * h);
        assert!((gx[[0, 0]] - fd).abs() < 1e-6);
    }

    use rand::SeedableRng;

    #[test]
    fn adam_descends_quadratic() {
        let mut p = vec![5.0_f64];
        let mut opt = Adam::new(0.1, 1);
        for _ in 0..500 {
            let g = vec![2.0 * p[0]];
            opt.step(&mut p, &g);
        }
        assert!(p[0].abs() < 0.05, "converged to {}", p[0]);
    }
}
