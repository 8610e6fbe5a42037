//! Self-describing model checkpoints.
//!
//! ```text
//! magic "MOTIONDIFF-CKPT\0", version = 1 (u32)
//! section count (u32)
//! count × (tag: 4 bytes, offset: u64, length: u64)   offsets from file start
//! section bodies
//! ```
//!
//! Sections: `CONF` JSON metadata, `PARM` tensors, `SCHD` schedule, `NORM`
//! normalization statistics, `REPR` kind code, `SKEL` skeleton JSON, `STEP`
//! step counter and seed, and optionally `RNG ` generator state JSON and
//! `OPTM` optimizer moments. Tensors are `u32 rows, u32 cols, f64 data`.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::binary::{Reader, Writer};
use crate::denoiser::{Adam, AdamConfig, Denoiser, DenoiserConfig, Mat, Real, TrainConfig, Trainer, TrainingSet};
use crate::diffusion::{DiffusionSchedule, ScheduleKind};
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::representation::{Normalizer, ReprKind};
use crate::skeleton::Skeleton;

pub const CHECKPOINT_MAGIC: &[u8; 16] = b"MOTIONDIFF-CKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON header of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub denoiser: DenoiserConfig,
    /// Clip length the model was trained on.
    pub frames: usize,
    pub fps: f64,
    /// Scalar type of the training run (`f32` or `f64`).
    pub precision: String,
    pub train: Option<TrainConfig>,
    pub loss: Option<LossConfig>,
    /// Free-form run configuration for provenance.
    #[serde(default)]
    pub run: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Mat<f64>>,
    pub v: Vec<Mat<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: Vec<Mat<f64>>,
    pub schedule: DiffusionSchedule,
    pub kind: ReprKind,
    pub normalizer: Normalizer,
    pub skeleton: Skeleton,
    pub step: u64,
    /// Seed the run started from.
    pub seed: u64,
    pub rng: Option<ChaCha8Rng>,
    pub optimizer: Option<OptimizerState>,
}

fn put_tensors(w: &mut Writer, ts: &[Mat<f64>]) {
    w.u32(ts.len() as u32);
    for t in ts {
        w.u32(t.rows as u32);
        w.u32(t.cols as u32);
        w.f64s(&t.data);
    }
}

fn get_tensors(r: &mut Reader<'_>) -> Result<Vec<Mat<f64>>> {
    let n = r.usize32()?;
    (0..n)
        .map(|_| {
            let rows = r.usize32()?;
            let cols = r.usize32()?;
            Ok(Mat::from_vec(rows, cols, r.f64s(rows * cols)?))
        })
        .collect()
}

fn schedule_code(k: ScheduleKind) -> u32 {
    match k {
        ScheduleKind::Cosine => 1,
        ScheduleKind::Linear => 2,
    }
}

impl Checkpoint {
    /// Snapshot of a trainer, including optimizer and generator state so a
    /// resumed run continues exactly.
    pub fn from_trainer<F: Real>(trainer: &Trainer<F>, seed: u64, run: serde_json::Value) -> Self {
        let data = &trainer.data;
        let (m, v) = trainer.optimizer.moments();
        Checkpoint {
            meta: CheckpointMeta {
                denoiser: trainer.model.config().clone(),
                frames: data.frames(),
                fps: data.raw()[0].fps,
                precision: F::NAME.into(),
                train: Some(trainer.config),
                loss: Some(trainer.loss),
                run,
            },
            params: trainer.model.params().iter().map(Mat::cast).collect(),
            schedule: trainer.schedule.clone(),
            kind: data.kind,
            normalizer: data.normalizer.clone(),
            skeleton: data.skeleton.clone(),
            step: trainer.step,
            seed,
            rng: Some(trainer.rng.clone()),
            optimizer: Some(OptimizerState {
                config: trainer.optimizer.config,
                step: trainer.optimizer.step_count(),
                m: m.iter().map(Mat::cast).collect(),
                v: v.iter().map(Mat::cast).collect(),
            }),
        }
    }

    pub fn model<F: Real>(&self) -> Result<Denoiser<F>> {
        Denoiser::from_params(self.meta.denoiser.clone(), self.params.iter().map(Mat::cast).collect())
    }

    /// Rebuilds the trainer this checkpoint was taken from. `data` must be
    /// the same training set.
    pub fn into_trainer<F: Real>(self, data: TrainingSet) -> Result<Trainer<F>> {
        let (Some(train), Some(loss), Some(rng), Some(opt)) = (self.meta.train, self.meta.loss, self.rng.clone(), self.optimizer.clone()) else {
            return Err(Error::Format("checkpoint carries no training state".into()));
        };
        if data.normalizer != self.normalizer || data.kind != self.kind {
            return Err(Error::invalid("training set does not match the checkpoint's statistics or kind"));
        }
        let model = self.model::<F>()?;
        let mut t = Trainer::new(model, self.schedule.clone(), loss, train, data, rng)?;
        t.optimizer = Adam::from_state(opt.config, opt.step, opt.m.iter().map(Mat::cast).collect(), opt.v.iter().map(Mat::cast).collect())?;
        t.step = self.step;
        Ok(t)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut sections: Vec<(&[u8; 4], Vec<u8>)> = Vec::new();
        sections.push((b"CONF", serde_json::to_vec(&self.meta)?));
        let mut w = Writer::default();
        put_tensors(&mut w, &self.params);
        sections.push((b"PARM", w.buf));
        let mut w = Writer::default();
        w.u32(schedule_code(self.schedule.kind));
        w.u32(self.schedule.steps() as u32);
        w.f64s(self.schedule.betas());
        sections.push((b"SCHD", w.buf));
        let mut w = Writer::default();
        w.u32(self.normalizer.dim() as u32);
        w.f64s(&self.normalizer.mean);
        w.f64s(&self.normalizer.std);
        sections.push((b"NORM", w.buf));
        sections.push((b"REPR", self.kind.code().to_le_bytes().to_vec()));
        sections.push((b"SKEL", serde_json::to_vec(&self.skeleton)?));
        let mut w = Writer::default();
        w.u64(self.step);
        w.u64(self.seed);
        sections.push((b"STEP", w.buf));
        if let Some(rng) = &self.rng {
            sections.push((b"RNG ", serde_json::to_vec(rng)?));
        }
        if let Some(o) = &self.optimizer {
            let mut w = Writer::default();
            w.blob(&serde_json::to_vec(&o.config)?);
            w.u64(o.step);
            put_tensors(&mut w, &o.m);
            put_tensors(&mut w, &o.v);
            sections.push((b"OPTM", w.buf));
        }

        let mut out = Writer::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        out.u32(sections.len() as u32);
        let mut offset = (out.buf.len() + sections.len() * 20) as u64;
        for (tag, body) in &sections {
            out.buf.extend_from_slice(*tag);
            out.u64(offset);
            out.u64(body.len() as u64);
            offset += body.len() as u64;
        }
        for (_, body) in &sections {
            out.buf.extend_from_slice(body);
        }
        Ok(out.buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::open(buf, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let count = r.usize32()?;
        let mut table = Vec::with_capacity(count);
        for _ in 0..count {
            let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
            let off = r.u64()? as usize;
            let len = r.u64()? as usize;
            let end = off.checked_add(len).filter(|e| *e <= buf.len()).ok_or_else(|| {
                Error::Format(format!("section {} out of bounds", String::from_utf8_lossy(&tag)))
            })?;
            table.push((tag, &buf[off..end]));
        }
        let find = |tag: &[u8; 4]| table.iter().find(|(t, _)| t == tag).map(|(_, b)| *b);
        let need = |tag: &[u8; 4]| {
            find(tag).ok_or_else(|| Error::Format(format!("missing section {}", String::from_utf8_lossy(tag))))
        };

        let meta: CheckpointMeta = serde_json::from_slice(need(b"CONF")?)?;
        let mut r = Reader::at(need(b"PARM")?, 0);
        let params = get_tensors(&mut r)?;
        r.finish()?;

        let mut r = Reader::at(need(b"SCHD")?, 0);
        let kind = match r.u32()? {
            1 => ScheduleKind::Cosine,
            2 => ScheduleKind::Linear,
            c => return Err(Error::Format(format!("unknown schedule code {c}"))),
        };
        let steps = r.usize32()?;
        let schedule = DiffusionSchedule::from_betas(kind, &r.f64s(steps)?)?;
        r.finish()?;

        let mut r = Reader::at(need(b"NORM")?, 0);
        let d = r.usize32()?;
        let normalizer = Normalizer { mean: r.f64s(d)?, std: r.f64s(d)? };
        r.finish()?;

        let repr = need(b"REPR")?;
        let kind_code = u32::from_le_bytes(repr.try_into().map_err(|_| Error::Format("REPR section size".into()))?);
        let skeleton: Skeleton = serde_json::from_slice(need(b"SKEL")?)?;
        skeleton.validate()?;

        let mut r = Reader::at(need(b"STEP")?, 0);
        let (step, seed) = (r.u64()?, r.u64()?);
        r.finish()?;

        let rng = find(b"RNG ").map(serde_json::from_slice).transpose()?;
        let optimizer = match find(b"OPTM") {
            None => None,
            Some(body) => {
                let mut r = Reader::at(body, 0);
                let config = serde_json::from_slice(r.blob()?)?;
                let step = r.u64()?;
                let m = get_tensors(&mut r)?;
                let v = get_tensors(&mut r)?;
                r.finish()?;
                Some(OptimizerState { config, step, m, v })
            }
        };
        let ck = Checkpoint {
            meta,
            params,
            schedule,
            kind: ReprKind::from_code(kind_code)?,
            normalizer,
            skeleton,
            step,
            seed,
            rng,
            optimizer,
        };
        ck.model::<f64>()?;
        Ok(ck)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
