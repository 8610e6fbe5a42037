mod common;

use motiondiff::dataio::{
    downsample, features_from_bytes, features_to_bytes, generate_synthetic, window, Checkpoint, ClipFile,
    SyntheticMotionSpec,
};
use motiondiff::denoiser::{AdamConfig, Denoiser, DenoiserConfig, TrainConfig, Trainer, TrainingSet};
use motiondiff::diffusion::cosine_schedule;
use motiondiff::losses::{ContactThresholds, LossConfig};
use motiondiff::representation::{encode, ReprKind};
use motiondiff::{Error, Skeleton};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_trainer(seed: u64) -> Trainer<f32> {
    let spec = SyntheticMotionSpec { clips: 6, frames: 8, ..Default::default() };
    let skel = spec.skeleton().unwrap();
    let feats = generate_synthetic(&spec).unwrap().iter().map(|c| encode(c, ReprKind::Rp6jr, &skel).unwrap()).collect();
    let data = TrainingSet::new(feats, skel, ContactThresholds::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = DenoiserConfig { latent_dim: 16, ffn_dim: 16, num_layers: 1, ..DenoiserConfig::desk(data.feature_dim(), 8) };
    let model = Denoiser::new(cfg, &mut rng).unwrap();
    let tc = TrainConfig { batch_size: 3, optimizer: AdamConfig { lr: 1e-3, ..Default::default() } };
    Trainer::new(model, cosine_schedule(50).unwrap(), LossConfig::default(), tc, data, rng).unwrap()
}

#[test]
fn checkpoint_resume_continues_exactly() {
    let mut straight = small_trainer(3);
    let full = straight.run(8, |_| {}).unwrap();

    let mut first = small_trainer(3);
    first.run(4, |_| {}).unwrap();
    let bytes = Checkpoint::from_trainer(&first, 3, serde_json::Value::Null).to_bytes().unwrap();
    let data = first.data.clone();
    let mut resumed: Trainer<f32> = Checkpoint::from_bytes(&bytes).unwrap().into_trainer(data).unwrap();
    let rest = resumed.run(4, |_| {}).unwrap();

    for (a, b) in full[4..].iter().zip(&rest) {
        assert_eq!(a.step, b.step);
        assert_eq!(a.loss.total.to_bits(), b.loss.total.to_bits());
    }
    assert_eq!(straight.model.params(), resumed.model.params());
}

#[test]
fn checkpoint_rejects_truncation_and_foreign_files() {
    let bytes = Checkpoint::from_trainer(&small_trainer(0), 0, serde_json::Value::Null).to_bytes().unwrap();
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let clip = ClipFile::new(Skeleton::chain(2, 1.0).unwrap(), motiondiff::MotionClip::rest(2, 2, 30.0)).unwrap();
    assert!(matches!(Checkpoint::from_bytes(&clip.to_bytes().unwrap()), Err(Error::BadMagic { .. })));
}

#[test]
fn feature_file_round_trip_and_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let skel = common::random_skeleton(&mut rng, 5);
    let clip = common::random_clip(&mut rng, 5, 9);
    for kind in ReprKind::ALL {
        let fm = encode(&clip, kind, &skel).unwrap();
        let bytes = features_to_bytes(&fm);
        assert_eq!(features_from_bytes(&bytes).unwrap(), fm);
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(features_from_bytes(&extra), Err(Error::Format(_))));
        let mut bad_dim = bytes.clone();
        bad_dim[32..36].copy_from_slice(&7u32.to_le_bytes());
        assert!(features_from_bytes(&bad_dim).is_err());
    }
}

#[test]
fn clip_file_rejects_mismatched_skeleton() {
    let clip = motiondiff::MotionClip::rest(3, 4, 30.0);
    assert!(ClipFile::new(Skeleton::chain(4, 1.0).unwrap(), clip).is_err());
}

#[test]
fn windowing_and_downsampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let clip = common::random_clip(&mut rng, 3, 20);
    let w = window(&clip, 8, 4).unwrap();
    assert_eq!(w.len(), 4);
    assert_eq!(w[1].rotations[0], clip.rotations[4]);
    assert!(window(&clip, 21, 1).unwrap().is_empty());
    assert!(window(&clip, 8, 0).is_err());
    let d = downsample(&clip, 3).unwrap();
    assert_eq!(d.frames(), 7);
    assert_eq!(d.root_positions[2], clip.root_positions[6]);
    assert!((d.fps - 10.0).abs() < 1e-12);
}
