//! File formats, clip windowing/resampling and synthetic datasets.

pub mod binary;
pub mod checkpoint;
pub mod files;
pub mod synthetic;

pub use checkpoint::{Checkpoint, CheckpointMeta, OptimizerState, CHECKPOINT_VERSION};
pub use files::{
    features_from_bytes, features_to_bytes, read_features, read_skeleton, write_features, write_skeleton, ClipFile,
    CLIP_VERSION, FEATURE_VERSION,
};
pub use synthetic::{generate_synthetic, GeneratorKind, SyntheticMotionSpec};

use crate::clip::MotionClip;
use crate::error::{Error, Result};

/// Windows of `length` frames starting every `stride` frames; a trailing
/// partial window is dropped, and a clip shorter than `length` gives none.
pub fn window(clip: &MotionClip, length: usize, stride: usize) -> Result<Vec<MotionClip>> {
    if length == 0 || stride == 0 {
        return Err(Error::invalid("window length and stride must be at least 1"));
    }
    let n = clip.frames();
    if length > n {
        return Ok(Vec::new());
    }
    Ok((0..=(n - length) / stride).map(|k| clip.slice(k * stride, length)).collect())
}

/// Keeps every `factor`-th frame starting at 0 and divides the frame rate.
pub fn downsample(clip: &MotionClip, factor: usize) -> Result<MotionClip> {
    if factor == 0 {
        return Err(Error::invalid("downsample factor must be at least 1"));
    }
    MotionClip::new(
        clip.fps / factor as f64,
        clip.root_positions.iter().step_by(factor).copied().collect(),
        clip.rotations.iter().step_by(factor).cloned().collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_counts() {
        let c = MotionClip::rest(2, 130, 30.0);
        assert_eq!(window(&c, 64, 64).unwrap().len(), 2);
        assert_eq!(window(&MotionClip::rest(2, 64, 30.0), 64, 64).unwrap().len(), 1);
        assert!(window(&c, 131, 1).unwrap().is_empty());
    }

    #[test]
    fn downsample_indices() {
        let mut c = MotionClip::rest(1, 10, 60.0);
        for (i, p) in c.root_positions.iter_mut().enumerate() {
            p[0] = i as f64;
        }
        let d = downsample(&c, 3).unwrap();
        assert_eq!(d.root_positions.iter().map(|p| p[0]).collect::<Vec<_>>(), vec![0.0, 3.0, 6.0, 9.0]);
        assert_eq!(downsample(&c, 2).unwrap().fps, 30.0);
        assert_eq!(downsample(&c, 1).unwrap(), c);
    }
}
