//! The six motion representations and their encode/decode maps.
//!
//! A [`FeatureMatrix`] is `D × N` (features × frames) and is stored
//! frame-major: the `D` features of frame 0, then frame 1, and so on.
//!
//! Per-frame layouts:
//!
//! * `Jp`: `J` joint positions `[x, y, z]`, joint-major, world frame with the
//!   first-frame root moved to the origin. `D = 3J`.
//! * rotation kinds: `J` rotation blocks of width `w` in skeleton order, then
//!   the root position zero-padded to width `w`. `D = (J + 1)·w` with
//!   `w = 6, 4, 3, 3, 9` for 6D, quaternion, axis-angle, Euler and matrix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clip::MotionClip;
use crate::error::{Error, Result};
use crate::rotations::{
    self, axis_angle_to_matrix, enforce_quat_continuity, euler_to_matrix, matrix_to_euler,
    matrix_to_quat, matrix_to_sixd, project_to_rotation, quat_to_axis_angle, quat_to_matrix,
    sixd_to_matrix, vjp, AxisAngle, EulerAngles, Mat3, Quaternion, RotationMatrix, SixD, Vec3,
};
use crate::skeleton::{fk_matrices, fk_matrices_backward, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReprKind {
    /// Joint positions.
    Jp,
    /// Root position + 6D joint rotations.
    Rp6jr,
    /// Root position + quaternion joint rotations.
    Rpqjr,
    /// Root position + axis-angle joint rotations.
    Rpajr,
    /// Root position + Euler joint rotations.
    Rpejr,
    /// Root position + rotation-matrix joint rotations.
    Rpmjr,
}

impl ReprKind {
    pub const ALL: [ReprKind; 6] = [
        ReprKind::Jp,
        ReprKind::Rp6jr,
        ReprKind::Rpqjr,
        ReprKind::Rpajr,
        ReprKind::Rpejr,
        ReprKind::Rpmjr,
    ];

    /// Width of one joint block.
    pub fn block_width(self) -> usize {
        match self {
            ReprKind::Jp => 3,
            ReprKind::Rp6jr => 6,
            ReprKind::Rpqjr => 4,
            ReprKind::Rpajr => 3,
            ReprKind::Rpejr => 3,
            ReprKind::Rpmjr => 9,
        }
    }

    pub fn is_rotation(self) -> bool {
        self != ReprKind::Jp
    }

    pub fn feature_dim(self, joints: usize) -> usize {
        match self {
            ReprKind::Jp => joints * 3,
            k => (joints + 1) * k.block_width(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReprKind::Jp => "JP",
            ReprKind::Rp6jr => "RP6JR",
            ReprKind::Rpqjr => "RPQJR",
            ReprKind::Rpajr => "RPAJR",
            ReprKind::Rpejr => "RPEJR",
            ReprKind::Rpmjr => "RPMJR",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            ReprKind::Jp => 0,
            ReprKind::Rp6jr => 1,
            ReprKind::Rpqjr => 2,
            ReprKind::Rpajr => 3,
            ReprKind::Rpejr => 4,
            ReprKind::Rpmjr => 5,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        ReprKind::ALL
            .into_iter()
            .find(|k| k.code() == code)
            .ok_or_else(|| Error::UnknownKind(code.to_string()))
    }
}

impl fmt::Display for ReprKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReprKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase();
        ReprKind::ALL
            .into_iter()
            .find(|k| k.name() == up)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub kind: ReprKind,
    pub joints: usize,
    pub frames: usize,
    pub fps: f64,
    /// Frame-major, `frames × dim` values.
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(kind: ReprKind, joints: usize, frames: usize, fps: f64, data: Vec<f64>) -> Result<Self> {
        if frames == 0 {
            return Err(Error::shape("feature matrix needs at least one frame"));
        }
        let d = kind.feature_dim(joints);
        if data.len() != d * frames {
            return Err(Error::shape(format!(
                "{} values for {kind} with J={joints}, N={frames} (expected {})",
                data.len(),
                d * frames
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature value {i}")));
        }
        Ok(FeatureMatrix {
            kind,
            joints,
            frames,
            fps,
            data,
        })
    }

    pub fn zeros(kind: ReprKind, joints: usize, frames: usize, fps: f64) -> Self {
        FeatureMatrix {
            kind,
            joints,
            frames,
            fps,
            data: vec![0.0; kind.feature_dim(joints) * frames],
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.feature_dim(self.joints)
    }

    /// Feature `d` at frame `n`.
    pub fn get(&self, d: usize, n: usize) -> f64 {
        self.data[n * self.dim() + d]
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        let d = self.dim();
        &self.data[n * d..(n + 1) * d]
    }

    pub fn frame_mut(&mut self, n: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.data[n * d..(n + 1) * d]
    }

    /// Time series of one feature.
    pub fn feature_row(&self, d: usize) -> Vec<f64> {
        (0..self.frames).map(|n| self.get(d, n)).collect()
    }

    /// Positions-as-features view (`Jp` layout) of decoded joint positions.
    pub fn from_positions(positions: &[Vec<Vec3>], fps: f64) -> Result<Self> {
        let j = positions.first().map_or(0, |p| p.len());
        let data = positions.iter().flat_map(|f| f.iter().flatten().copied()).collect();
        FeatureMatrix::new(ReprKind::Jp, j, positions.len(), fps, data)
    }
}

fn rotation_block(kind: ReprKind, q: Quaternion) -> Result<Vec<f64>> {
    Ok(match kind {
        ReprKind::Rp6jr => matrix_to_sixd(&quat_to_matrix(q)?).0.to_vec(),
        ReprKind::Rpqjr => q.to_array().to_vec(),
        ReprKind::Rpajr => quat_to_axis_angle(q).to_array().to_vec(),
        ReprKind::Rpejr => matrix_to_euler(&quat_to_matrix(q)?).angles.to_array().to_vec(),
        ReprKind::Rpmjr => quat_to_matrix(q)?.to_flat().to_vec(),
        ReprKind::Jp => unreachable!("positions have no rotation block"),
    })
}

/// Encodes a clip under `kind`.
pub fn encode(clip: &MotionClip, kind: ReprKind, skel: &Skeleton) -> Result<FeatureMatrix> {
    clip.validate()?;
    let j = skel.joint_count();
    if clip.joints() != j {
        return Err(Error::shape(format!(
            "clip has {} joints, skeleton {j}",
            clip.joints()
        )));
    }
    let n = clip.frames();
    let d = kind.feature_dim(j);
    let mut data = Vec::with_capacity(d * n);
    match kind {
        ReprKind::Jp => {
            let origin = clip.root_positions[0];
            for pos in clip.joint_positions(skel)? {
                for p in pos {
                    data.extend_from_slice(&rotations::sub(p, origin));
                }
            }
        }
        _ => {
            let w = kind.block_width();
            let mut rots = clip.rotations.clone();
            if kind == ReprKind::Rpqjr {
                for joint in 0..j {
                    let seq: Vec<Quaternion> = rots.iter().map(|f| f[joint]).collect();
                    for (f, q) in enforce_quat_continuity(&seq).into_iter().enumerate() {
                        rots[f][joint] = q;
                    }
                }
            }
            for (frame, root) in rots.iter().zip(&clip.root_positions) {
                for q in frame {
                    data.extend(rotation_block(kind, *q)?);
                }
                data.extend_from_slice(root);
                data.extend(std::iter::repeat_n(0.0, w - 3));
            }
        }
    }
    FeatureMatrix::new(kind, j, n, clip.fps, data)
}

/// Raw rotation features → valid rotation matrix.
fn project_block(kind: ReprKind, b: &[f64]) -> std::result::Result<Mat3, String> {
    match kind {
        ReprKind::Rp6jr => sixd_to_matrix(&SixD([b[0], b[1], b[2], b[3], b[4], b[5]]))
            .map(|r| r.m)
            .map_err(|e| e.to_string()),
        ReprKind::Rpqjr => vjp::quat_raw_to_matrix([b[0], b[1], b[2], b[3]]).map_err(|e| e.to_string()),
        ReprKind::Rpajr => Ok(axis_angle_to_matrix(&AxisAngle::new(b[0], b[1], b[2])).m),
        ReprKind::Rpejr => Ok(euler_to_matrix(&EulerAngles {
            ex: b[0],
            ey: b[1],
            ez: b[2],
        })
        .m),
        ReprKind::Rpmjr => project_to_rotation(&RotationMatrix::flat_to_mat3(b))
            .map(|r| r.m)
            .map_err(|e| e.to_string()),
        ReprKind::Jp => unreachable!(),
    }
}

/// Per-frame state kept by [`decode_frame`] for the reverse pass.
#[derive(Debug, Clone)]
pub struct FrameDecode {
    pub positions: Vec<Vec3>,
    locals: Vec<Mat3>,
    world: Vec<Mat3>,
}

impl FrameDecode {
    pub fn local_rotations(&self) -> &[Mat3] {
        &self.locals
    }
}

/// Decodes one frame of features to joint positions, keeping what the
/// reverse pass needs. `frame_index` only labels errors.
pub fn decode_frame(
    kind: ReprKind,
    skel: &Skeleton,
    features: &[f64],
    frame_index: usize,
) -> Result<FrameDecode> {
    let j = skel.joint_count();
    if features.len() != kind.feature_dim(j) {
        return Err(Error::shape(format!(
            "frame has {} features, {kind} with J={j} needs {}",
            features.len(),
            kind.feature_dim(j)
        )));
    }
    if kind == ReprKind::Jp {
        let positions = features.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        return Ok(FrameDecode {
            positions,
            locals: Vec::new(),
            world: Vec::new(),
        });
    }
    let w = kind.block_width();
    let mut locals = Vec::with_capacity(j);
    for joint in 0..j {
        let b = &features[joint * w..(joint + 1) * w];
        let m = project_block(kind, b).map_err(|reason| Error::DegenerateFeatures {
            frame: frame_index,
            joint,
            reason,
        })?;
        locals.push(m);
    }
    let r = &features[j * w..j * w + 3];
    let (positions, world) = fk_matrices(skel, [r[0], r[1], r[2]], &locals);
    Ok(FrameDecode {
        positions,
        locals,
        world,
    })
}

/// Reverse pass of [`decode_frame`]: gradient of a loss with respect to the
/// frame's raw features given its gradient with respect to joint positions.
/// Padding features receive zero gradient.
pub fn decode_frame_vjp(
    kind: ReprKind,
    skel: &Skeleton,
    features: &[f64],
    cache: &FrameDecode,
    grad_positions: &[Vec3],
) -> Result<Vec<f64>> {
    let j = skel.joint_count();
    let mut out = vec![0.0; features.len()];
    if kind == ReprKind::Jp {
        for (o, g) in out.chunks_exact_mut(3).zip(grad_positions) {
            o.copy_from_slice(g);
        }
        return Ok(out);
    }
    let w = kind.block_width();
    let (groot, glocal) = fk_matrices_backward(skel, &cache.locals, &cache.world, grad_positions);
    for joint in 0..j {
        let b = &features[joint * w..(joint + 1) * w];
        let g = &glocal[joint];
        let o = &mut out[joint * w..(joint + 1) * w];
        match kind {
            ReprKind::Rp6jr => {
                o.copy_from_slice(&vjp::sixd_to_matrix_vjp([b[0], b[1], b[2], b[3], b[4], b[5]], g))
            }
            ReprKind::Rpqjr => o.copy_from_slice(&vjp::quat_raw_to_matrix_vjp([b[0], b[1], b[2], b[3]], g)),
            ReprKind::Rpajr => o.copy_from_slice(&vjp::axis_angle_to_matrix_vjp([b[0], b[1], b[2]], g)),
            ReprKind::Rpejr => o.copy_from_slice(&vjp::euler_to_matrix_vjp([b[0], b[1], b[2]], g)),
            ReprKind::Rpmjr => {
                let m = RotationMatrix::flat_to_mat3(b);
                let gm = vjp::polar_projection_vjp(&m, &cache.locals[joint], g).map_err(|e| {
                    Error::DegenerateFeatures {
                        frame: 0,
                        joint,
                        reason: e.to_string(),
                    }
                })?;
                for r in 0..3 {
                    for c in 0..3 {
                        o[r * 3 + c] = gm[r][c];
                    }
                }
            }
            ReprKind::Jp => unreachable!(),
        }
    }
    out[j * w..j * w + 3].copy_from_slice(&groot);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Decoded {
    /// Reconstructed clip; `None` for `Jp`, which carries no rotations.
    pub clip: Option<MotionClip>,
    /// `positions[frame][joint]`.
    pub positions: Vec<Vec<Vec3>>,
}

pub fn decode(fm: &FeatureMatrix, skel: &Skeleton) -> Result<Decoded> {
    if fm.joints != skel.joint_count() {
        return Err(Error::shape(format!(
            "feature matrix has J={}, skeleton {}",
            fm.joints,
            skel.joint_count()
        )));
    }
    let j = fm.joints;
    let mut positions = Vec::with_capacity(fm.frames);
    let mut roots = Vec::with_capacity(fm.frames);
    let mut rots: Vec<Vec<Quaternion>> = Vec::with_capacity(fm.frames);
    for n in 0..fm.frames {
        let f = fm.frame(n);
        let dec = decode_frame(fm.kind, skel, f, n)?;
        if fm.kind.is_rotation() {
            let w = fm.kind.block_width();
            roots.push([f[j * w], f[j * w + 1], f[j * w + 2]]);
            rots.push(
                dec.locals
                    .iter()
                    .map(|m| matrix_to_quat(&RotationMatrix::from_rows_unchecked(*m)))
                    .collect(),
            );
        }
        positions.push(dec.positions);
    }
    let clip = if fm.kind.is_rotation() {
        for joint in 0..j {
            let seq: Vec<Quaternion> = rots.iter().map(|f| f[joint]).collect();
            for (f, q) in enforce_quat_continuity(&seq).into_iter().enumerate() {
                rots[f][joint] = q;
            }
        }
        Some(MotionClip::new(fm.fps, roots, rots)?)
    } else {
        None
    };
    Ok(Decoded { clip, positions })
}

pub fn decode_positions(fm: &FeatureMatrix, skel: &Skeleton) -> Result<Vec<Vec<Vec3>>> {
    (0..fm.frames)
        .map(|n| decode_frame(fm.kind, skel, fm.frame(n), n).map(|d| d.positions))
        .collect()
}

/// Replaces each rotation block by the features of its projected rotation
/// (renormalized quaternion, Gram–Schmidt 6D, polar-projected matrix).
/// Axis-angle, Euler and position features are left unchanged.
pub fn project_rotations(fm: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut out = fm.clone();
    let kind = fm.kind;
    if !matches!(kind, ReprKind::Rp6jr | ReprKind::Rpqjr | ReprKind::Rpmjr) {
        return Ok(out);
    }
    let w = kind.block_width();
    for n in 0..fm.frames {
        let frame = out.frame_mut(n);
        for joint in 0..fm.joints {
            let b = &mut frame[joint * w..(joint + 1) * w];
            let m = project_block(kind, b).map_err(|reason| Error::DegenerateFeatures {
                frame: n,
                joint,
                reason,
            })?;
            let r = RotationMatrix::from_rows_unchecked(m);
            match kind {
                ReprKind::Rp6jr => b.copy_from_slice(&matrix_to_sixd(&r).0),
                ReprKind::Rpqjr => {
                    let nrm = (b.iter().map(|v| v * v).sum::<f64>()).sqrt();
                    b.iter_mut().for_each(|v| *v /= nrm);
                }
                ReprKind::Rpmjr => b.copy_from_slice(&r.to_flat()),
                _ => unreachable!(),
            }
        }
    }
    Ok(out)
}

/// Per-dimension z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Dimensions whose spread falls below this are left unscaled.
pub const MIN_STD: f64 = 1e-8;

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Statistics over every frame of every clip.
    pub fn fit(set: &[FeatureMatrix]) -> Result<Self> {
        let first = set.first().ok_or_else(|| Error::invalid("empty training set"))?;
        let d = first.dim();
        let mut sum = vec![0.0; d];
        let mut count = 0usize;
        for fm in set {
            if fm.dim() != d {
                return Err(Error::shape("feature dimension differs across the set"));
            }
            for n in 0..fm.frames {
                for (s, v) in sum.iter_mut().zip(fm.frame(n)) {
                    *s += v;
                }
            }
            count += fm.frames;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; d];
        for fm in set {
            for n in 0..fm.frames {
                for ((s, v), m) in var.iter_mut().zip(fm.frame(n)).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                if s < MIN_STD {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Normalizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, fm: &FeatureMatrix) -> FeatureMatrix {
        let mut out = fm.clone();
        let d = self.dim();
        for (i, v) in out.data.iter_mut().enumerate() {
            let k = i % d;
            *v = (*v - self.mean[k]) / self.std[k];
        }
        out
    }

    pub fn denormalize(&self, fm: &FeatureMatrix) -> FeatureMatrix {
        let mut out = fm.clone();
        let d = self.dim();
        for (i, v) in out.data.iter_mut().enumerate() {
            let k = i % d;
            *v = *v * self.std[k] + self.mean[k];
        }
        out
    }
}
