//! Scores two Gaussian clouds against each other with every metric.

use motiondiff::metrics::{diversity, fid, kid, precision_recall};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn cloud(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..8).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

fn main() -> motiondiff::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let real = cloud(&mut rng, 300, 0.0);
    for shift in [0.0, 0.25, 1.0] {
        let gen = cloud(&mut rng, 300, shift);
        let (p, r) = precision_recall(&real, &gen, 3)?;
        println!(
            "shift {shift:.2}: FID {:.4}  KID {:.4}  precision {p:.3}  recall {r:.3}  diversity {:.3}",
            fid(&real, &gen)?,
            kid(&real, &gen)?,
            diversity(&real, &gen, 200, &mut rng)?
        );
    }
    Ok(())
}
