//! Trains a few steps, checkpoints, resumes and confirms the resumed run
//! matches an uninterrupted one.

use motiondiff::dataio::{generate_synthetic, Checkpoint, SyntheticMotionSpec};
use motiondiff::denoiser::{Denoiser, DenoiserConfig, TrainConfig, Trainer, TrainingSet};
use motiondiff::diffusion::cosine_schedule;
use motiondiff::losses::{ContactThresholds, LossConfig};
use motiondiff::representation::{encode, ReprKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn trainer() -> motiondiff::Result<Trainer<f32>> {
    let spec = SyntheticMotionSpec { clips: 32, ..Default::default() };
    let skel = spec.skeleton()?;
    let feats = generate_synthetic(&spec)?.iter().map(|c| encode(c, ReprKind::Rpajr, &skel)).collect::<motiondiff::Result<_>>()?;
    let data = TrainingSet::new(feats, skel, ContactThresholds::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = Denoiser::new(DenoiserConfig::desk(data.feature_dim(), spec.frames), &mut rng)?;
    Trainer::new(model, cosine_schedule(100)?, LossConfig::default(), TrainConfig::default(), data, rng)
}

fn main() -> motiondiff::Result<()> {
    let mut a = trainer()?;
    a.run(20, |_| {})?;
    let path = std::env::temp_dir().join("motiondiff-example.ckpt");
    Checkpoint::from_trainer(&a, 7, serde_json::json!({"example": true})).write(&path)?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    let last_a = a.run(5, |_| {})?;

    let data = a.data.clone();
    let mut b: Trainer<f32> = Checkpoint::read(&path)?.into_trainer(data)?;
    let last_b = b.run(5, |_| {})?;
    for (x, y) in last_a.iter().zip(&last_b) {
        println!("step {:>2}  {:.6}  {:.6}", x.step, x.loss.total, y.loss.total);
    }
    println!("identical parameters: {}", a.model.params() == b.model.params());
    Ok(())
}
