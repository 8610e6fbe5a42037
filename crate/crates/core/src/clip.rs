//! Canonical motion storage: per-frame root positions and unit-quaternion
//! local joint rotations.

use crate::error::{Error, Result};
use crate::rotations::{Quaternion, Vec3};
use crate::skeleton::{forward_kinematics, Pose, Skeleton};

#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub fps: f64,
    pub root_positions: Vec<Vec3>,
    /// `rotations[frame][joint]`.
    pub rotations: Vec<Vec<Quaternion>>,
}

impl MotionClip {
    pub fn new(fps: f64, root_positions: Vec<Vec3>, rotations: Vec<Vec<Quaternion>>) -> Result<Self> {
        let clip = MotionClip {
            fps,
            root_positions,
            rotations,
        };
        clip.validate()?;
        Ok(clip)
    }

    /// A clip holding the identity pose at the origin for `frames` frames.
    pub fn rest(joints: usize, frames: usize, fps: f64) -> Self {
        MotionClip {
            fps,
            root_positions: vec![[0.0; 3]; frames],
            rotations: vec![vec![Quaternion::IDENTITY; joints]; frames],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.root_positions.is_empty() {
            return Err(Error::shape("clip has no frames"));
        }
        if self.root_positions.len() != self.rotations.len() {
            return Err(Error::shape("root/rotation frame count mismatch"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {}", self.fps)));
        }
        let j = self.rotations[0].len();
        for (f, (root, rots)) in self.root_positions.iter().zip(&self.rotations).enumerate() {
            if rots.len() != j {
                return Err(Error::shape(format!("frame {f} has {} joints, expected {j}", rots.len())));
            }
            if root.iter().any(|v| !v.is_finite()) || rots.iter().any(|q| !q.is_finite()) {
                return Err(Error::NonFinite(format!("frame {f}")));
            }
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.root_positions.len()
    }

    pub fn joints(&self) -> usize {
        self.rotations.first().map_or(0, |r| r.len())
    }

    pub fn pose(&self, frame: usize) -> Pose {
        Pose {
            root_position: self.root_positions[frame],
            joint_rotations: self.rotations[frame].clone(),
        }
    }

    /// World joint positions per frame.
    pub fn joint_positions(&self, skel: &Skeleton) -> Result<Vec<Vec<Vec3>>> {
        if self.joints() != skel.joint_count() {
            return Err(Error::shape(format!(
                "clip has {} joints, skeleton {}",
                self.joints(),
                skel.joint_count()
            )));
        }
        (0..self.frames())
            .map(|f| forward_kinematics(skel, &self.pose(f)))
            .collect()
    }

    /// Frames `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> MotionClip {
        MotionClip {
            fps: self.fps,
            root_positions: self.root_positions[start..start + len].to_vec(),
            rotations: self.rotations[start..start + len].to_vec(),
        }
    }
}
