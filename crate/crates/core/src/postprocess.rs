//! Temporal Gaussian smoothing of generated clips.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::{project_rotations, FeatureMatrix};
use crate::rotations::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BoundaryMode {
    /// Mirror about the edge, repeating the edge sample (`d c b a | a b c d`).
    #[default]
    Reflect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    /// Standard deviation in frames.
    pub sigma: f64,
    /// Kernel radius in multiples of `sigma`.
    pub truncate: f64,
    #[serde(default)]
    pub mode: BoundaryMode,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            sigma: 1.5,
            truncate: 4.0,
            mode: BoundaryMode::Reflect,
        }
    }
}

impl SmootherConfig {
    pub fn radius(&self) -> usize {
        (self.truncate * self.sigma + 0.5).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma = {} must be positive", self.sigma)));
        }
        if self.radius() < 1 {
            return Err(Error::invalid(format!(
                "truncate {} with sigma {} gives a zero radius",
                self.truncate, self.sigma
            )));
        }
        Ok(())
    }

    /// Normalized weights for offsets `−radius..=radius`.
    pub fn kernel(&self) -> Vec<f64> {
        let r = self.radius() as i64;
        let w: Vec<f64> = (-r..=r)
            .map(|x| (-0.5 * (x as f64 / self.sigma).powi(2)).exp())
            .collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }
}

fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Convolves one signal with the configured kernel.
pub fn smooth_signal(x: &[f64], cfg: &SmootherConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let k = cfg.kernel();
    let r = cfg.radius() as i64;
    let n = x.len() as i64;
    Ok((0..n)
        .map(|i| {
            k.iter()
                .enumerate()
                .map(|(o, w)| w * x[reflect(i + o as i64 - r, n)])
                .sum()
        })
        .collect())
}

/// Smooths every feature row along time; shape is preserved and no
/// re-projection happens.
pub fn gaussian_smooth(fm: &FeatureMatrix, cfg: &SmootherConfig) -> Result<FeatureMatrix> {
    let mut out = fm.clone();
    for d in 0..fm.dim() {
        let s = smooth_signal(&fm.feature_row(d), cfg)?;
        for (n, v) in s.into_iter().enumerate() {
            out.frame_mut(n)[d] = v;
        }
    }
    Ok(out)
}

/// Smooths a generated clip in its own feature space, then projects
/// rotation blocks back to valid rotations. For joint positions this is
/// smoothing in position space.
pub fn smooth_motion(fm: &FeatureMatrix, cfg: &SmootherConfig) -> Result<FeatureMatrix> {
    project_rotations(&gaussian_smooth(fm, cfg)?)
}

/// Smooths decoded joint positions `[frame][joint]` directly.
pub fn smooth_positions(positions: &[Vec<Vec3>], cfg: &SmootherConfig) -> Result<Vec<Vec<Vec3>>> {
    let fm = FeatureMatrix::from_positions(positions, 1.0)?;
    let s = gaussian_smooth(&fm, cfg)?;
    Ok((0..s.frames)
        .map(|n| s.frame(n).chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
        .collect())
}
