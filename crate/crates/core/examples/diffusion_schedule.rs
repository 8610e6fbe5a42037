//! Prints the cosine schedule and runs the reverse chain with a model that
//! knows the answer, which must land exactly on the target.

use motiondiff::diffusion::{cosine_schedule, sample, ReverseVariance, VPredictor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Known(Vec<f64>, motiondiff::diffusion::DiffusionSchedule);

impl VPredictor for Known {
    fn feature_dim(&self) -> usize {
        self.0.len()
    }

    fn max_frames(&self) -> usize {
        1
    }

    fn predict_v(&self, batch: &[Vec<f64>], _frames: usize, t: usize) -> motiondiff::Result<Vec<Vec<f64>>> {
        let ab = self.1.alpha_bar(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(batch
            .iter()
            .map(|x| x.iter().zip(&self.0).map(|(xt, x0)| a * (xt - a * x0) / b - b * x0).collect())
            .collect())
    }
}

fn main() -> motiondiff::Result<()> {
    let sch = cosine_schedule(100)?;
    for t in [1, 10, 25, 50, 75, 90, 99, 100] {
        println!("t {t:>3}  beta {:.5}  alpha_bar {:.5}  sigma {:.5}", sch.beta(t), sch.alpha_bar(t), sch.posterior_variance(t).sqrt());
    }
    let target = vec![0.5, -1.0, 2.0];
    let model = Known(target.clone(), sch.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = sample(&model, &sch, 3, 1, 2, ReverseVariance::Posterior, &mut rng)?;
    println!("target {target:?}\nsampled {out:?}");
    Ok(())
}
