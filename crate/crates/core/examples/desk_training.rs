//! Trains the desk-scale denoiser on synthetic gait, samples from it and
//! scores the samples against held-out clips.
//!
//! ```text
//! cargo run --release --example desk_training -- [steps] [kind]
//! ```

use std::time::Instant;

use motiondiff::dataio::{generate_synthetic, SyntheticMotionSpec};
use motiondiff::denoiser::{AdamConfig, Denoiser, DenoiserConfig, TrainConfig, Trainer, TrainingSet};
use motiondiff::diffusion::{cosine_schedule, sample, ReverseVariance};
use motiondiff::losses::{ContactThresholds, LossConfig};
use motiondiff::metrics::{evaluate, FlattenExtractor, MetricConfig};
use motiondiff::postprocess::{smooth_motion, SmootherConfig};
use motiondiff::representation::{decode_positions, encode, FeatureMatrix, ReprKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> motiondiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(2000, |s| s.parse().expect("steps"));
    let kind: ReprKind = args.next().map_or(Ok(ReprKind::Rp6jr), |s| s.parse())?;
    let lr: f64 = args.next().map_or(1e-3, |s| s.parse().expect("lr"));
    let batch: usize = args.next().map_or(16, |s| s.parse().expect("batch"));

    let spec = SyntheticMotionSpec { clips: 768, ..Default::default() };
    let skel = spec.skeleton()?;
    let clips = generate_synthetic(&spec)?;
    let feats: Vec<FeatureMatrix> = clips.iter().map(|c| encode(c, kind, &skel)).collect::<motiondiff::Result<_>>()?;
    let (train, held_out) = feats.split_at(512);
    let data = TrainingSet::new(train.to_vec(), skel.clone(), ContactThresholds::default())?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = Denoiser::<f32>::new(DenoiserConfig::desk(data.feature_dim(), spec.frames), &mut rng)?;
    let schedule = cosine_schedule(100)?;
    let cfg = TrainConfig { batch_size: batch, optimizer: AdamConfig { lr, ..Default::default() } };
    let mut trainer = Trainer::new(model, schedule.clone(), LossConfig::default(), cfg, data, rng)?;

    let start = Instant::now();
    let records = trainer.run(steps, |r| {
        if r.step % 500 == 0 {
            println!("step {:>6}  loss {:.5}  v {:.5}  pos {:.5}", r.step, r.loss.total, r.loss.v, r.loss.position);
        }
    })?;
    let head: f64 = records.iter().take(100).map(|r| r.loss.total).sum::<f64>() / 100f64.min(records.len() as f64);
    let tail: f64 = records.iter().rev().take(100).map(|r| r.loss.total).sum::<f64>() / 100f64.min(records.len() as f64);
    println!("trained {steps} steps in {:.1}s; loss {head:.4} -> {tail:.4}", start.elapsed().as_secs_f64());

    let mut srng = ChaCha8Rng::seed_from_u64(1);
    let d = trainer.data.feature_dim();
    let raw = sample(&trainer.model, &schedule, d, spec.frames, 256, ReverseVariance::Posterior, &mut srng)?;
    let norm = &trainer.data.normalizer;
    let smoother = SmootherConfig::default();
    let mut gen = Vec::new();
    for x in raw {
        let fm = norm.denormalize(&FeatureMatrix::new(kind, skel.joint_count(), spec.frames, spec.fps, x)?);
        gen.push(decode_positions(&smooth_motion(&fm, &smoother)?, &skel)?);
    }
    let real: Vec<_> = held_out.iter().map(|f| decode_positions(f, &skel)).collect::<motiondiff::Result<_>>()?;
    let report = evaluate(&real, &gen, spec.fps, &FlattenExtractor, MetricConfig::default())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(())
}
