//! Noise schedules, forward noising, v-parameterization algebra and the
//! ancestral sampling loop.
//!
//! Timesteps run `1..=T`; index 0 of every table is the clean state
//! (`ᾱ_0 = 1`, `β_0 = 0`).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset of the cosine schedule.
pub const COSINE_OFFSET: f64 = 0.008;
/// Upper clamp on every `β_t`.
pub const MAX_BETA: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleKind {
    Cosine,
    /// Linear in β from 1e-4 to 2e-2, rescaled to the step count.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    pub kind: ScheduleKind,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(kind: ScheduleKind, steps: usize) -> Result<Self> {
        match kind {
            ScheduleKind::Cosine => cosine_schedule(steps),
            ScheduleKind::Linear => linear_schedule(steps),
        }
    }

    /// Builds the tables from explicit betas (`betas[t-1]` is `β_t`).
    pub fn from_betas(kind: ScheduleKind, betas: &[f64]) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::invalid("a schedule needs at least 2 steps"));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::invalid(format!("beta {b} outside (0, 1)")));
        }
        let mut beta = Vec::with_capacity(betas.len() + 1);
        let mut alpha = Vec::with_capacity(betas.len() + 1);
        let mut alpha_bar = Vec::with_capacity(betas.len() + 1);
        beta.push(0.0);
        alpha.push(1.0);
        alpha_bar.push(1.0);
        let mut prod = 1.0;
        for &b in betas {
            let a = 1.0 - b;
            prod *= a;
            beta.push(b);
            alpha.push(a);
            alpha_bar.push(prod);
        }
        Ok(DiffusionSchedule {
            kind,
            beta,
            alpha,
            alpha_bar,
        })
    }

    pub fn steps(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// `β_1..β_T`.
    pub fn betas(&self) -> &[f64] {
        &self.beta[1..]
    }

    /// Posterior variance `β̃_t = (1 − ᾱ_{t−1}) / (1 − ᾱ_t) · β_t`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar[t - 1]) / (1.0 - self.alpha_bar[t]) * self.beta[t]
    }

    pub fn check_timestep(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::invalid(format!(
                "timestep {t} outside [1, {}]",
                self.steps()
            )));
        }
        Ok(())
    }
}

/// `ᾱ_t = f(t)/f(0)`, `f(t) = cos²(((t/T + s)/(1 + s))·π/2)`, with
/// `β_t = min(1 − ᾱ_t/ᾱ_{t−1}, 0.999)`.
pub fn cosine_schedule(steps: usize) -> Result<DiffusionSchedule> {
    if steps < 2 {
        return Err(Error::invalid("cosine schedule needs T >= 2"));
    }
    let f = |t: f64| {
        let c = ((t / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * std::f64::consts::FRAC_PI_2).cos();
        c * c
    };
    let betas: Vec<f64> = (1..=steps)
        .map(|t| (1.0 - f(t as f64) / f((t - 1) as f64)).min(MAX_BETA))
        .collect();
    DiffusionSchedule::from_betas(ScheduleKind::Cosine, &betas)
}

pub fn linear_schedule(steps: usize) -> Result<DiffusionSchedule> {
    if steps < 2 {
        return Err(Error::invalid("linear schedule needs T >= 2"));
    }
    let scale = 1000.0 / steps as f64;
    let (lo, hi) = (scale * 1e-4, (scale * 0.02).min(MAX_BETA));
    let betas: Vec<f64> = (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect();
    DiffusionSchedule::from_betas(ScheduleKind::Linear, &betas)
}

fn same_len(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("{what}: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

/// `x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε`.
pub fn q_sample(schedule: &DiffusionSchedule, x0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
    schedule.check_timestep(t)?;
    same_len(x0, eps, "q_sample")?;
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

/// `v = √ᾱ_t·ε − √(1−ᾱ_t)·x0`.
pub fn compute_v(schedule: &DiffusionSchedule, x0: &[f64], eps: &[f64], t: usize) -> Result<Vec<f64>> {
    same_len(x0, eps, "compute_v")?;
    Ok(v_from_alpha_bar(schedule.alpha_bar(t), x0, eps))
}

pub(crate) fn v_from_alpha_bar(ab: f64, x0: &[f64], eps: &[f64]) -> Vec<f64> {
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.iter().zip(eps).map(|(x, e)| a * e - b * x).collect()
}

/// `x0 = √ᾱ_t·x_t − √(1−ᾱ_t)·v`.
pub fn v_to_x0(schedule: &DiffusionSchedule, x_t: &[f64], v: &[f64], t: usize) -> Result<Vec<f64>> {
    same_len(x_t, v, "v_to_x0")?;
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x_t.iter().zip(v).map(|(x, v)| a * x - b * v).collect())
}

/// `ε = √(1−ᾱ_t)·x_t + √ᾱ_t·v`.
pub fn v_to_eps(schedule: &DiffusionSchedule, x_t: &[f64], v: &[f64], t: usize) -> Result<Vec<f64>> {
    same_len(x_t, v, "v_to_eps")?;
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x_t.iter().zip(v).map(|(x, v)| b * x + a * v).collect())
}

/// Standard deviation used for the reverse-step noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReverseVariance {
    /// `σ_t = √β̃_t`.
    #[default]
    Posterior,
    /// `σ_t = √β_t`.
    Beta,
    /// Deterministic: `σ_t = 0`.
    None,
}

impl ReverseVariance {
    pub fn sigma(self, schedule: &DiffusionSchedule, t: usize) -> f64 {
        match self {
            ReverseVariance::Posterior => schedule.posterior_variance(t).sqrt(),
            ReverseVariance::Beta => schedule.beta(t).sqrt(),
            ReverseVariance::None => 0.0,
        }
    }
}

/// One ancestral step from a v prediction:
/// `x_{t−1} = (x_t − β_t/√(1−ᾱ_t)·ε̂)/√α_t + σ_t·z`, `z = 0` at `t = 1`.
pub fn p_sample_step<R: Rng + ?Sized>(
    schedule: &DiffusionSchedule,
    x_t: &[f64],
    t: usize,
    v_pred: &[f64],
    variance: ReverseVariance,
    rng: &mut R,
) -> Result<Vec<f64>> {
    schedule.check_timestep(t)?;
    let eps = v_to_eps(schedule, x_t, v_pred, t)?;
    let coef = schedule.beta(t) / (1.0 - schedule.alpha_bar(t)).sqrt();
    let inv = 1.0 / schedule.alpha(t).sqrt();
    let sigma = if t > 1 { variance.sigma(schedule, t) } else { 0.0 };
    Ok(x_t
        .iter()
        .zip(&eps)
        .map(|(x, e)| {
            let mean = inv * (x - coef * e);
            if sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                mean + sigma * z
            } else {
                mean
            }
        })
        .collect())
}

/// Anything that predicts `v` for a batch of noisy samples sharing one
/// timestep. Each sample is a frame-major `frames × feature_dim` slice.
pub trait VPredictor {
    fn feature_dim(&self) -> usize;
    fn max_frames(&self) -> usize;
    fn predict_v(&self, batch: &[Vec<f64>], frames: usize, t: usize) -> Result<Vec<Vec<f64>>>;
}

/// Runs the reverse chain from `T` down to 1 starting at standard normal
/// noise, for `count` samples of shape `(dim, frames)`.
pub fn sample<M: VPredictor + ?Sized, R: Rng + ?Sized>(
    model: &M,
    schedule: &DiffusionSchedule,
    dim: usize,
    frames: usize,
    count: usize,
    variance: ReverseVariance,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if dim != model.feature_dim() || frames == 0 || frames > model.max_frames() {
        return Err(Error::shape(format!(
            "requested shape ({dim}, {frames}) incompatible with model ({}, <= {})",
            model.feature_dim(),
            model.max_frames()
        )));
    }
    let mut xs: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..dim * frames).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    for t in (1..=schedule.steps()).rev() {
        let v = model.predict_v(&xs, frames, t)?;
        for (x, vp) in xs.iter_mut().zip(&v) {
            *x = p_sample_step(schedule, x, t, vp, variance, rng)?;
        }
    }
    Ok(xs)
}
