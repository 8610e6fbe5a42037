//! Smooths a jittery clip and shows the smoothness score before and after.

use motiondiff::dataio::{generate_synthetic, SyntheticMotionSpec};
use motiondiff::metrics::smoothness;
use motiondiff::postprocess::{smooth_motion, SmootherConfig};
use motiondiff::representation::{decode_positions, encode, FeatureMatrix, ReprKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> motiondiff::Result<()> {
    let spec = SyntheticMotionSpec { clips: 1, frames: 64, ..Default::default() };
    let skel = spec.skeleton()?;
    let mut fm = encode(&generate_synthetic(&spec)?[0], ReprKind::Rp6jr, &skel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    fm.data.iter_mut().for_each(|v| *v += 0.02 * (rng.random::<f64>() - 0.5));
    let score = |fm: &FeatureMatrix| -> motiondiff::Result<f64> {
        smoothness(&[FeatureMatrix::from_positions(&decode_positions(fm, &skel)?, fm.fps)?], 1.0)
    };
    println!("noisy     {:.5}", score(&fm)?);
    for sigma in [0.75, 1.5, 3.0] {
        let cfg = SmootherConfig { sigma, ..Default::default() };
        println!("sigma {sigma:<4} {:.5} (radius {})", score(&smooth_motion(&fm, &cfg)?)?, cfg.radius());
    }
    Ok(())
}
