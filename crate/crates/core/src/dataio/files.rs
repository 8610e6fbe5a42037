//! Clip and feature-matrix files.
//!
//! Clip file (all integers `u32`, reals `f64`, little-endian):
//!
//! ```text
//! magic  "MOTIONDIFF-CLIP\0"   16 bytes
//! version                       = 1
//! fps, J, N
//! rotation tag                  = 1 (unit quaternion w, x, y, z)
//! skeleton                      u64 length + JSON bytes
//! N × (root x y z, J × (w x y z))
//! ```
//!
//! Feature file:
//!
//! ```text
//! magic  "MOTIONDIFF-FEAT\0"
//! version = 1, kind code, J, N, D, fps
//! N × D reals, frame-major
//! ```

use std::fs;
use std::path::Path;

use super::binary::{Reader, Writer};
use crate::clip::MotionClip;
use crate::error::{Error, Result};
use crate::representation::{FeatureMatrix, ReprKind};
use crate::rotations::Quaternion;
use crate::skeleton::Skeleton;

pub const CLIP_MAGIC: &[u8; 16] = b"MOTIONDIFF-CLIP\0";
pub const CLIP_VERSION: u32 = 1;
pub const FEATURE_MAGIC: &[u8; 16] = b"MOTIONDIFF-FEAT\0";
pub const FEATURE_VERSION: u32 = 1;
/// Rotation convention tag for scalar-first unit quaternions.
pub const ROTATION_WXYZ: u32 = 1;

/// A clip together with the skeleton it animates.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFile {
    pub skeleton: Skeleton,
    pub clip: MotionClip,
}

impl ClipFile {
    pub fn new(skeleton: Skeleton, clip: MotionClip) -> Result<Self> {
        if clip.joints() != skeleton.joint_count() {
            return Err(Error::shape(format!(
                "clip has {} joints, skeleton {}",
                clip.joints(),
                skeleton.joint_count()
            )));
        }
        Ok(ClipFile { skeleton, clip })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let c = &self.clip;
        let mut w = Writer::new(CLIP_MAGIC, CLIP_VERSION);
        w.f64(c.fps);
        w.u32(c.joints() as u32);
        w.u32(c.frames() as u32);
        w.u32(ROTATION_WXYZ);
        w.blob(&serde_json::to_vec(&self.skeleton)?);
        for (root, rots) in c.root_positions.iter().zip(&c.rotations) {
            w.f64s(root);
            for q in rots {
                w.f64s(&q.to_array());
            }
        }
        Ok(w.buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::open(buf, CLIP_MAGIC, CLIP_VERSION)?;
        let fps = r.f64()?;
        let j = r.usize32()?;
        let n = r.usize32()?;
        let tag = r.u32()?;
        if tag != ROTATION_WXYZ {
            return Err(Error::Format(format!("unknown rotation tag {tag}")));
        }
        let skeleton: Skeleton = serde_json::from_slice(r.blob()?)?;
        skeleton.validate()?;
        let mut roots = Vec::with_capacity(n);
        let mut rots = Vec::with_capacity(n);
        for _ in 0..n {
            let p = r.f64s(3)?;
            roots.push([p[0], p[1], p[2]]);
            let q = r.f64s(4 * j)?;
            rots.push(q.chunks_exact(4).map(|c| Quaternion::from_array([c[0], c[1], c[2], c[3]])).collect());
        }
        r.finish()?;
        Self::new(skeleton, MotionClip::new(fps, roots, rots)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub fn features_to_bytes(fm: &FeatureMatrix) -> Vec<u8> {
    let mut w = Writer::new(FEATURE_MAGIC, FEATURE_VERSION);
    w.u32(fm.kind.code());
    w.u32(fm.joints as u32);
    w.u32(fm.frames as u32);
    w.u32(fm.dim() as u32);
    w.f64(fm.fps);
    w.f64s(&fm.data);
    w.buf
}

pub fn features_from_bytes(buf: &[u8]) -> Result<FeatureMatrix> {
    let mut r = Reader::open(buf, FEATURE_MAGIC, FEATURE_VERSION)?;
    let kind = ReprKind::from_code(r.u32()?)?;
    let j = r.usize32()?;
    let n = r.usize32()?;
    let d = r.usize32()?;
    if d != kind.feature_dim(j) {
        return Err(Error::Format(format!("header D = {d}, but {kind} with J = {j} has {}", kind.feature_dim(j))));
    }
    let fps = r.f64()?;
    let data = r.f64s(n * d)?;
    r.finish()?;
    FeatureMatrix::new(kind, j, n, fps, data)
}

pub fn write_features(path: impl AsRef<Path>, fm: &FeatureMatrix) -> Result<()> {
    fs::write(path, features_to_bytes(fm))?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    features_from_bytes(&fs::read(path)?)
}

pub fn read_skeleton(path: impl AsRef<Path>) -> Result<Skeleton> {
    let s: Skeleton = serde_json::from_slice(&fs::read(path)?)?;
    s.validate()?;
    Ok(s)
}

pub fn write_skeleton(path: impl AsRef<Path>, skel: &Skeleton) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(skel)?)?;
    Ok(())
}
