//! Adam with bias correction and optional decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::tensor::{Mat, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Mat<F>>,
    v: Vec<Mat<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(config: AdamConfig, params: &[Mat<F>]) -> Self {
        let zeros = || params.iter().map(|p| Mat::zeros(p.rows, p.cols)).collect();
        Adam { config, step: 0, m: zeros(), v: zeros() }
    }

    /// Restores saved moments.
    pub fn from_state(config: AdamConfig, step: u64, m: Vec<Mat<F>>, v: Vec<Mat<F>>) -> Result<Self> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::shape("optimizer moment tensors disagree"));
        }
        Ok(Adam { config, step, m, v })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Mat<F>], &[Mat<F>]) {
        (&self.m, &self.v)
    }

    /// One update; `None` gradients count as zero.
    pub fn update(&mut self, params: &mut [Mat<F>], grads: &[Option<Mat<F>>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::shape(format!(
                "optimizer holds {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let c = self.config;
        let f = F::from_f64_lossy;
        let (b1, b2) = (f(c.beta1), f(c.beta2));
        let bc1 = f(1.0 - c.beta1.powf(self.step as f64));
        let bc2 = f(1.0 - c.beta2.powf(self.step as f64));
        let (lr, eps, wd) = (f(c.lr), f(c.eps), f(c.weight_decay));
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let g = grads[i].as_ref();
            for e in 0..p.data.len() {
                let ge = g.map_or(F::zero(), |g| g.data[e]);
                m.data[e] = b1 * m.data[e] + (F::one() - b1) * ge;
                v.data[e] = b2 * v.data[e] + (F::one() - b2) * ge * ge;
                let mhat = m.data[e] / bc1;
                let vhat = v.data[e] / bc2;
                let mut upd = mhat / (vhat.sqrt() + eps);
                if c.weight_decay != 0.0 {
                    upd += wd * p.data[e];
                }
                p.data[e] -= lr * upd;
            }
        }
        Ok(())
    }
}
