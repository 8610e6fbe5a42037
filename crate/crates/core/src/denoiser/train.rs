//! Training loop: q_sample → forward → loss → backward → Adam.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::model::Denoiser;
use super::tape::Tape;
use super::tensor::{Mat, Real};
use crate::diffusion::{compute_v, q_sample, DiffusionSchedule};
use crate::error::{Error, Result};
use crate::losses::{foot_contacts_from_positions, total_loss_grad, ContactThresholds, FootContactLabels, LossBreakdown, LossConfig, SampleLoss};
use crate::representation::{decode_positions, FeatureMatrix, Normalizer, ReprKind};
use crate::skeleton::Skeleton;

/// Encoded training clips with their normalization and contact labels.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub kind: ReprKind,
    pub skeleton: Skeleton,
    pub normalizer: Normalizer,
    raw: Vec<FeatureMatrix>,
    normalized: Vec<FeatureMatrix>,
    labels: Vec<Option<FootContactLabels>>,
}

impl TrainingSet {
    /// Fits the normalizer on `clips` and extracts contact labels when the
    /// skeleton names foot joints.
    pub fn new(clips: Vec<FeatureMatrix>, skeleton: Skeleton, thresholds: ContactThresholds) -> Result<Self> {
        let normalizer = Normalizer::fit(&clips)?;
        Self::with_normalizer(clips, skeleton, normalizer, thresholds)
    }

    pub fn with_normalizer(
        clips: Vec<FeatureMatrix>,
        skeleton: Skeleton,
        normalizer: Normalizer,
        thresholds: ContactThresholds,
    ) -> Result<Self> {
        let first = clips.first().ok_or_else(|| Error::invalid("empty training set"))?;
        let (kind, joints, frames) = (first.kind, first.joints, first.frames);
        if joints != skeleton.joint_count() {
            return Err(Error::shape(format!("clips have J={joints}, skeleton {}", skeleton.joint_count())));
        }
        if normalizer.dim() != first.dim() {
            return Err(Error::shape(format!("normalizer has {} dims, features {}", normalizer.dim(), first.dim())));
        }
        let mut labels = Vec::with_capacity(clips.len());
        for (i, c) in clips.iter().enumerate() {
            if (c.kind, c.joints, c.frames) != (kind, joints, frames) {
                return Err(Error::shape(format!("clip {i} differs in kind or shape from clip 0")));
            }
            labels.push(match skeleton.foot_joints() {
                Some(feet) if frames >= 2 => Some(foot_contacts_from_positions(&decode_positions(c, &skeleton)?, feet, thresholds)),
                _ => None,
            });
        }
        let normalized = clips.iter().map(|c| normalizer.normalize(c)).collect();
        Ok(TrainingSet { kind, skeleton, normalizer, raw: clips, normalized, labels })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn frames(&self) -> usize {
        self.raw[0].frames
    }

    pub fn feature_dim(&self) -> usize {
        self.raw[0].dim()
    }

    pub fn raw(&self) -> &[FeatureMatrix] {
        &self.raw
    }

    pub fn labels(&self, i: usize) -> Option<&FootContactLabels> {
        self.labels[i].as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            optimizer: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub loss: LossBreakdown,
    pub grad_norm: f64,
    /// Wall-clock time of the step; not part of any reproducibility check.
    pub seconds: f64,
}

/// One optimization step on the clips `batch` (indices into `data`).
#[allow(clippy::too_many_arguments)]
pub fn train_step<F: Real, R: Rng + ?Sized>(
    model: &mut Denoiser<F>,
    optimizer: &mut Adam<F>,
    data: &TrainingSet,
    batch: &[usize],
    schedule: &DiffusionSchedule,
    loss_cfg: &LossConfig,
    rng: &mut R,
) -> Result<(LossBreakdown, f64)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let (frames, d) = (data.frames(), data.feature_dim());
    let n = frames * d;
    let mut ts = Vec::with_capacity(batch.len());
    let mut xts = Vec::with_capacity(batch.len());
    let mut vs = Vec::with_capacity(batch.len());
    for &i in batch {
        let x0 = &data.normalized[i].data;
        let t = rng.random_range(1..=schedule.steps());
        let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        xts.push(q_sample(schedule, x0, t, &eps)?);
        vs.push(compute_v(schedule, x0, &eps, t)?);
        ts.push(t);
    }
    let x = Mat::from_vec(batch.len() * frames, d, xts.iter().flatten().map(|v| F::from_f64_lossy(*v)).collect());
    let mut tape = Tape::new(model.params().len());
    let drop = if model.config().dropout > 0.0 { Some(&mut *rng) } else { None };
    let out = model.forward_tape(&mut tape, x, &ts, frames, drop)?;
    let vhat = tape.value(out);

    let inv_b = 1.0 / batch.len() as f64;
    let mut breakdowns = Vec::with_capacity(batch.len());
    let mut grad = Vec::with_capacity(batch.len() * n);
    for (k, &i) in batch.iter().enumerate() {
        let v_pred: Vec<f64> = vhat.data[k * n..(k + 1) * n].iter().map(|v| v.to_f64_lossy()).collect();
        let s = SampleLoss {
            t: ts[k],
            x_t: &xts[k],
            v_true: &vs[k],
            v_pred: &v_pred,
            x0: &data.raw[i],
            labels: data.labels(i),
        };
        let (b, g) = total_loss_grad(loss_cfg, schedule, &data.normalizer, &data.skeleton, &s)?;
        breakdowns.push(b);
        grad.extend(g.into_iter().map(|v| F::from_f64_lossy(v * inv_b)));
    }
    let loss = LossBreakdown::mean(&breakdowns);
    let grads = tape.backward(out, Mat::from_vec(batch.len() * frames, d, grad))?;
    let grad_norm = grads
        .iter()
        .flatten()
        .flat_map(|g| g.data.iter())
        .map(|v| v.to_f64_lossy().powi(2))
        .sum::<f64>()
        .sqrt();
    if !grad_norm.is_finite() {
        return Err(Error::NonFinite(format!("gradient norm at loss {loss:?}")));
    }
    optimizer.update(model.params_mut(), &grads)?;
    Ok((loss, grad_norm))
}

/// Owns everything a seeded run needs, so two trainers can be stepped in
/// any interleaving without affecting each other's results.
#[derive(Debug, Clone)]
pub struct Trainer<F> {
    pub model: Denoiser<F>,
    pub optimizer: Adam<F>,
    pub schedule: DiffusionSchedule,
    pub loss: LossConfig,
    pub config: TrainConfig,
    pub data: TrainingSet,
    pub rng: ChaCha8Rng,
    pub step: u64,
}

impl<F: Real> Trainer<F> {
    pub fn new(
        model: Denoiser<F>,
        schedule: DiffusionSchedule,
        loss: LossConfig,
        config: TrainConfig,
        data: TrainingSet,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        loss.validate()?;
        if config.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if model.config().feature_dim != data.feature_dim() || model.config().max_frames < data.frames() {
            return Err(Error::shape(format!(
                "model ({}, <= {}) cannot train on clips ({}, {})",
                model.config().feature_dim,
                model.config().max_frames,
                data.feature_dim(),
                data.frames()
            )));
        }
        let optimizer = Adam::new(config.optimizer, model.params());
        Ok(Trainer { model, optimizer, schedule, loss, config, data, rng, step: 0 })
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        let start = Instant::now();
        let batch: Vec<usize> = (0..self.config.batch_size).map(|_| self.rng.random_range(0..self.data.len())).collect();
        let (loss, grad_norm) = train_step(
            &mut self.model,
            &mut self.optimizer,
            &self.data,
            &batch,
            &self.schedule,
            &self.loss,
            &mut self.rng,
        )?;
        self.step += 1;
        Ok(StepRecord { step: self.step, loss, grad_norm, seconds: start.elapsed().as_secs_f64() })
    }

    pub fn run(&mut self, steps: u64, mut on_step: impl FnMut(&StepRecord)) -> Result<Vec<StepRecord>> {
        let mut out = Vec::with_capacity(steps as usize);
        for _ in 0..steps {
            let r = self.step()?;
            on_step(&r);
            out.push(r);
        }
        Ok(out)
    }
}
