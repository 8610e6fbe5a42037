//! Generative-model metrics over feature vectors: FID, KID,
//! precision/recall, diversity, plus the smoothness score over clips.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::FeatureMatrix;
use crate::rotations::Vec3;

/// Eigenvalues of the FID product below `−SQRT_TOLERANCE·max(1, λ_max)`
/// are treated as a failed square root; smaller negatives are clipped.
pub const SQRT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_DIVERSITY_PAIRS: usize = 200;
pub const DEFAULT_ALPHA: f64 = 1.0;

fn check_set(set: &[Vec<f64>], what: &str) -> Result<usize> {
    let d = set.first().map(Vec::len).ok_or_else(|| Error::invalid(format!("{what} set is empty")))?;
    for (i, row) in set.iter().enumerate() {
        if row.len() != d {
            return Err(Error::shape(format!("{what} vector {i} has length {}, expected {d}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{what} vector {i}")));
        }
    }
    Ok(d)
}

fn check_pair(real: &[Vec<f64>], gen: &[Vec<f64>]) -> Result<usize> {
    let d = check_set(real, "real")?;
    let dg = check_set(gen, "generated")?;
    if d != dg {
        return Err(Error::shape(format!("feature lengths differ: {d} vs {dg}")));
    }
    Ok(d)
}

fn moments(set: &[Vec<f64>], d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = set.len() as f64;
    let mut mu = DVector::zeros(d);
    for row in set {
        mu += DVector::from_column_slice(row);
    }
    mu /= n;
    let mut cov = DMatrix::zeros(d, d);
    for row in set {
        let c = DVector::from_column_slice(row) - &mu;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= (n - 1.0).max(1.0);
    (mu, cov)
}

/// Square root of a symmetric positive semi-definite matrix.
fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = SymmetricEigen::new(m.clone());
    let lim = clip_limit(&e.eigenvalues);
    let mut vals = e.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < lim {
            return Err(Error::Numeric(format!("covariance eigenvalue {v} is negative")));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose())
}

fn clip_limit(vals: &DVector<f64>) -> f64 {
    -SQRT_TOLERANCE * vals.iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

/// Fréchet distance `‖μ_r − μ_g‖² + tr(Σ_r + Σ_g − 2(Σ_rΣ_g)^{1/2})`
/// between Gaussian fits, with the trace of the square root taken as
/// `Σ √λ_i` over the eigenvalues of `Σ_r^{1/2} Σ_g Σ_r^{1/2}`.
pub fn fid(real: &[Vec<f64>], gen: &[Vec<f64>]) -> Result<f64> {
    let d = check_pair(real, gen)?;
    if real.len() <= d || gen.len() <= d {
        log::warn!("fid with {} / {} samples in {d} dimensions: covariances are singular", real.len(), gen.len());
    }
    let (mr, sr) = moments(real, d);
    let (mg, sg) = moments(gen, d);
    Ok(frechet_distance(&mr, &sr, &mg, &sg)?.max(0.0))
}

/// Fréchet distance between `N(μ1, Σ1)` and `N(μ2, Σ2)`.
pub fn frechet_distance(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let root = sym_sqrt(s1)?;
    let mut prod = &root * s2 * &root;
    prod = (&prod + prod.transpose()) * 0.5;
    let vals = SymmetricEigen::new(prod).eigenvalues;
    let lim = clip_limit(&vals);
    let mut tr_sqrt = 0.0;
    for v in vals.iter() {
        if *v < lim {
            return Err(Error::Numeric(format!("matrix square root failed: eigenvalue {v}")));
        }
        tr_sqrt += v.max(0.0).sqrt();
    }
    Ok((mu1 - mu2).norm_squared() + s1.trace() + s2.trace() - 2.0 * tr_sqrt)
}

/// `(xᵀy/d + 1)³`.
pub fn polynomial_kernel(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as f64;
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (dot / d + 1.0).powi(3)
}

/// Unbiased MMD² under [`polynomial_kernel`].
pub fn kid(real: &[Vec<f64>], gen: &[Vec<f64>]) -> Result<f64> {
    check_pair(real, gen)?;
    let (n, m) = (real.len(), gen.len());
    if n < 2 || m < 2 {
        return Err(Error::invalid(format!("kid needs at least 2 samples per set, got {n} and {m}")));
    }
    let within = |s: &[Vec<f64>]| {
        let mut acc = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if i != j {
                    acc += polynomial_kernel(&s[i], &s[j]);
                }
            }
        }
        acc / (s.len() * (s.len() - 1)) as f64
    };
    let mut cross = 0.0;
    for r in real {
        for g in gen {
            cross += polynomial_kernel(r, g);
        }
    }
    Ok(within(real) + within(gen) - 2.0 * cross / (n * m) as f64)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance from each point to its `k`-th nearest neighbour in the
/// same set (the point itself excluded).
pub fn knn_radii_sq(set: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    if k == 0 || set.len() <= k {
        return Err(Error::invalid(format!("k = {k} needs more than {k} points, got {}", set.len())));
    }
    Ok((0..set.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..set.len()).filter(|&j| j != i).map(|j| sq_dist(&set[i], &set[j])).collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1]
        })
        .collect())
}

fn coverage(manifold: &[Vec<f64>], radii: &[f64], probes: &[Vec<f64>]) -> f64 {
    let inside = probes
        .iter()
        .filter(|p| manifold.iter().zip(radii).any(|(c, r)| sq_dist(p, c) <= *r))
        .count();
    inside as f64 / probes.len() as f64
}

/// kNN-manifold precision (generated points inside the real manifold) and
/// recall (real points inside the generated manifold). Boundaries count as
/// inside.
pub fn precision_recall(real: &[Vec<f64>], gen: &[Vec<f64>], k: usize) -> Result<(f64, f64)> {
    check_pair(real, gen)?;
    let rr = knn_radii_sq(real, k)?;
    let rg = knn_radii_sq(gen, k)?;
    Ok((coverage(real, &rr, gen), coverage(gen, &rg, real)))
}

/// Mean L2 distance over explicit `(real, generated)` index pairs.
pub fn diversity_of_pairs(real: &[Vec<f64>], gen: &[Vec<f64>], pairs: &[(usize, usize)]) -> Result<f64> {
    check_pair(real, gen)?;
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs"));
    }
    let mut acc = 0.0;
    for &(i, j) in pairs {
        let (r, g) = (
            real.get(i).ok_or_else(|| Error::invalid(format!("real index {i} out of range")))?,
            gen.get(j).ok_or_else(|| Error::invalid(format!("generated index {j} out of range")))?,
        );
        acc += sq_dist(r, g).sqrt();
    }
    Ok(acc / pairs.len() as f64)
}

/// Mean distance between `pairs` randomly drawn real/generated vectors,
/// each side drawn without replacement.
pub fn diversity<R: Rng + ?Sized>(real: &[Vec<f64>], gen: &[Vec<f64>], pairs: usize, rng: &mut R) -> Result<f64> {
    if pairs == 0 || real.len() < pairs || gen.len() < pairs {
        return Err(Error::invalid(format!(
            "diversity over {pairs} pairs needs that many samples per set, got {} and {}",
            real.len(),
            gen.len()
        )));
    }
    let a = sample_indices(rng, real.len(), pairs);
    let b = sample_indices(rng, gen.len(), pairs);
    let idx: Vec<(usize, usize)> = a.iter().zip(b.iter()).collect();
    diversity_of_pairs(real, gen, &idx)
}

/// Mean over clips and features of `(1/(N−2))·Σ_t exp(−α·|x_{t+2} − 2x_{t+1} + x_t|)`.
pub fn smoothness(clips: &[FeatureMatrix], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must be positive")));
    }
    if clips.is_empty() {
        return Err(Error::invalid("no clips"));
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for (c, fm) in clips.iter().enumerate() {
        if fm.frames < 3 {
            return Err(Error::shape(format!("clip {c} has {} frames, smoothness needs 3", fm.frames)));
        }
        let d = fm.dim();
        let inner = (fm.frames - 2) as f64;
        for j in 0..d {
            let mut s = 0.0;
            for t in 0..fm.frames - 2 {
                let a = fm.get(j, t + 2) - 2.0 * fm.get(j, t + 1) + fm.get(j, t);
                s += (-alpha * a.abs()).exp();
            }
            acc += s / inner;
        }
        count += d;
    }
    Ok(acc / count as f64)
}

/// Maps a clip's joint positions (`[frame][joint]`) to a fixed-length
/// feature vector.
pub trait FeatureExtractor {
    fn id(&self) -> String;
    fn extract(&self, positions: &[Vec<Vec3>]) -> Result<Vec<f64>>;
}

/// Per-joint, per-axis temporal mean, standard deviation and mean absolute
/// frame difference, in that block order (`3·J·3` values).
pub fn flatten_extractor(positions: &[Vec<Vec3>]) -> Result<Vec<f64>> {
    let frames = positions.len();
    let j = positions.first().map(Vec::len).ok_or_else(|| Error::invalid("clip has no frames"))?;
    if positions.iter().any(|f| f.len() != j) {
        return Err(Error::shape("frames disagree on joint count"));
    }
    let n = frames as f64;
    let mut means = Vec::with_capacity(3 * j);
    let mut stds = Vec::with_capacity(3 * j);
    let mut diffs = Vec::with_capacity(3 * j);
    for joint in 0..j {
        for c in 0..3 {
            let mean = positions.iter().map(|f| f[joint][c]).sum::<f64>() / n;
            let var = positions.iter().map(|f| (f[joint][c] - mean).powi(2)).sum::<f64>() / n;
            let diff = if frames > 1 {
                positions.windows(2).map(|w| (w[1][joint][c] - w[0][joint][c]).abs()).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            means.push(mean);
            stds.push(var.sqrt());
            diffs.push(diff);
        }
    }
    means.extend(stds);
    means.extend(diffs);
    Ok(means)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlattenExtractor;

impl FeatureExtractor for FlattenExtractor {
    fn id(&self) -> String {
        "flatten-stats-v1".into()
    }

    fn extract(&self, positions: &[Vec<Vec3>]) -> Result<Vec<f64>> {
        flatten_extractor(positions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub k: usize,
    pub diversity_pairs: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            k: DEFAULT_K,
            diversity_pairs: DEFAULT_DIVERSITY_PAIRS,
            alpha: DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fid: f64,
    pub kid: f64,
    pub precision: f64,
    pub recall: f64,
    pub diversity: f64,
    /// Smoothness of the generated clips' joint positions.
    pub smoothness: f64,
    /// Same score on the reference clips.
    pub reference_smoothness: f64,
    pub real_count: usize,
    pub generated_count: usize,
    pub extractor: String,
    pub config: MetricConfig,
}

/// Scores generated clips against reference clips, both given as joint
/// positions `[clip][frame][joint]`.
pub fn evaluate(
    real: &[Vec<Vec<Vec3>>],
    gen: &[Vec<Vec<Vec3>>],
    fps: f64,
    extractor: &dyn FeatureExtractor,
    cfg: MetricConfig,
) -> Result<MetricReport> {
    use rand::SeedableRng;
    let fr = real.iter().map(|c| extractor.extract(c)).collect::<Result<Vec<_>>>()?;
    let fg = gen.iter().map(|c| extractor.extract(c)).collect::<Result<Vec<_>>>()?;
    let to_fm = |set: &[Vec<Vec<Vec3>>]| -> Result<Vec<FeatureMatrix>> {
        set.iter().map(|c| FeatureMatrix::from_positions(c, fps)).collect()
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let (precision, recall) = precision_recall(&fr, &fg, cfg.k)?;
    Ok(MetricReport {
        fid: fid(&fr, &fg)?,
        kid: kid(&fr, &fg)?,
        precision,
        recall,
        diversity: diversity(&fr, &fg, cfg.diversity_pairs.min(fr.len()).min(fg.len()), &mut rng)?,
        smoothness: smoothness(&to_fm(gen)?, cfg.alpha)?,
        reference_smoothness: smoothness(&to_fm(real)?, cfg.alpha)?,
        real_count: real.len(),
        generated_count: gen.len(),
        extractor: extractor.id(),
        config: cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::ReprKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gauss(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.sample(rand_distr::StandardNormal)).collect()).collect()
    }

    #[test]
    fn fid_self_is_zero_and_shift_is_mean_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = gauss(&mut rng, 200, 4);
        assert!(fid(&a, &a).unwrap() < 1e-8);
        let mu = [1.0, -2.0, 0.5, 0.0];
        let b: Vec<Vec<f64>> = a.iter().map(|r| r.iter().zip(&mu).map(|(x, m)| x + m).collect()).collect();
        let exp: f64 = mu.iter().map(|m| m * m).sum();
        assert!((fid(&a, &b).unwrap() - exp).abs() < 1e-6);
    }

    #[test]
    fn kid_matches_brute_force_on_four_points() {
        let r = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![-1.0, 2.0]];
        let g = vec![vec![2.0, 2.0], vec![0.5, 0.0], vec![3.0, -1.0], vec![0.0, 0.0]];
        let k = |a: &[f64], b: &[f64]| ((a[0] * b[0] + a[1] * b[1]) / 2.0 + 1.0).powi(3);
        let mut xx = 0.0;
        let mut yy = 0.0;
        let mut xy = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    xx += k(&r[i], &r[j]);
                    yy += k(&g[i], &g[j]);
                }
                xy += k(&r[i], &g[j]);
            }
        }
        let exp = xx / 12.0 + yy / 12.0 - 2.0 * xy / 16.0;
        assert_eq!(kid(&r, &g).unwrap(), exp);
    }

    #[test]
    fn precision_recall_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = gauss(&mut rng, 20, 3);
        assert_eq!(precision_recall(&a, &a, 3).unwrap(), (1.0, 1.0));
        let far: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| v + 1e3).collect()).collect();
        assert_eq!(precision_recall(&a, &far, 3).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn diversity_constant_offset() {
        let a = vec![vec![1.0, 2.0]; 5];
        let b = vec![vec![4.0, 6.0]; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((diversity(&a, &b, 5, &mut rng).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(diversity(&a, &a, 5, &mut rng).unwrap(), 0.0);
        assert!(diversity(&a, &b, 6, &mut rng).is_err());
    }

    #[test]
    fn smoothness_closed_forms() {
        let ramp = FeatureMatrix::new(ReprKind::Jp, 1, 5, 30.0, (0..15).map(|i| (i / 3) as f64 * 0.3).collect()).unwrap();
        assert_eq!(smoothness(&[ramp], 1.0).unwrap(), 1.0);
        let a = 0.2;
        let quad = FeatureMatrix::new(ReprKind::Jp, 1, 6, 30.0, (0..18).map(|i| 0.5 * a * ((i / 3) as f64).powi(2)).collect()).unwrap();
        assert!((smoothness(&[quad], 2.0).unwrap() - (-2.0 * a).exp()).abs() < 1e-12);
        assert!(smoothness(&[], 1.0).is_err());
    }

    #[test]
    fn flatten_features_are_reversal_symmetric() {
        let clip: Vec<Vec<Vec3>> = (0..6).map(|t| vec![[t as f64, (t * t) as f64 * 0.1, 1.0]]).collect();
        let mut rev = clip.clone();
        rev.reverse();
        let (a, b) = (flatten_extractor(&clip).unwrap(), flatten_extractor(&rev).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(a.len(), 9);
    }
}
