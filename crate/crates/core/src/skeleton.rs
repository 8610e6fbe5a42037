//! Kinematic trees and forward kinematics.
//!
//! Joints are stored topologically sorted (a parent always precedes its
//! children) with a single root at index 0. World rotations compose
//! parent-to-child, `W_j = W_parent(j) · L_j`, and each joint sits at
//! `p_j = p_parent(j) + W_parent(j) · offset_j`. The up axis is +y.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotations::{
    add, axis_angle_to_quat, mat_mul, mat_vec, quat_to_matrix, skew, transpose, AxisAngle, Mat3,
    Quaternion, Vec3,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub name: String,
    /// Parent index per joint, `-1` for the root.
    parents: Vec<i32>,
    /// Rest offset from the parent joint.
    offsets: Vec<Vec3>,
    /// Left ankle, right ankle, left foot, right foot.
    foot_joints: Option<[usize; 4]>,
    #[serde(default)]
    joint_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub root_position: Vec3,
    pub joint_rotations: Vec<Quaternion>,
}

impl Pose {
    pub fn identity(joints: usize) -> Self {
        Pose {
            root_position: [0.0; 3],
            joint_rotations: vec![Quaternion::IDENTITY; joints],
        }
    }
}

/// Direction in pose space: a root translation plus one local angular
/// velocity per joint (`L_j ← L_j · exp(h·[ω_j]×)`).
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTangent {
    pub root: Vec3,
    pub rotations: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct JacobianCheck {
    pub analytic: Vec<Vec3>,
    pub numeric: Vec<Vec3>,
    pub max_rel_error: f64,
}

const SMPL_NAMES: [&str; 24] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

const SMPL_PARENTS: [i32; 24] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

// Neutral-body rest offsets in metres.
const SMPL_OFFSETS: [Vec3; 24] = [
    [0.0, 0.0, 0.0],
    [0.0586, -0.0823, -0.0177],
    [-0.0603, -0.0905, -0.0135],
    [0.0044, 0.1244, -0.0384],
    [0.0435, -0.3865, 0.0080],
    [-0.0433, -0.3837, -0.0048],
    [0.0045, 0.1380, 0.0268],
    [-0.0148, -0.4269, -0.0374],
    [0.0191, -0.4200, -0.0346],
    [-0.0023, 0.0560, 0.0029],
    [0.0412, -0.0603, 0.1220],
    [-0.0348, -0.0621, 0.1303],
    [-0.0134, 0.2116, -0.0335],
    [0.0717, 0.1140, -0.0189],
    [-0.0830, 0.1125, -0.0237],
    [0.0101, 0.0889, 0.0504],
    [0.1229, 0.0452, -0.0190],
    [-0.1132, 0.0469, -0.0085],
    [0.2553, -0.0156, -0.0229],
    [-0.2601, -0.0143, -0.0313],
    [0.2657, 0.0127, -0.0074],
    [-0.2691, 0.0068, -0.0060],
    [0.0867, -0.0106, -0.0156],
    [-0.0888, -0.0087, -0.0101],
];

impl Skeleton {
    pub fn new(
        name: impl Into<String>,
        parents: Vec<i32>,
        offsets: Vec<Vec3>,
        foot_joints: Option<[usize; 4]>,
        joint_names: Vec<String>,
    ) -> Result<Self> {
        let s = Skeleton {
            name: name.into(),
            parents,
            offsets,
            foot_joints,
            joint_names,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.parents.len();
        if j == 0 {
            return Err(Error::InvalidSkeleton("no joints".into()));
        }
        if self.offsets.len() != j {
            return Err(Error::InvalidSkeleton(format!(
                "{} offsets for {j} joints",
                self.offsets.len()
            )));
        }
        if !self.joint_names.is_empty() && self.joint_names.len() != j {
            return Err(Error::InvalidSkeleton("joint name count mismatch".into()));
        }
        if self.parents[0] != -1 {
            return Err(Error::InvalidSkeleton("joint 0 must be the root".into()));
        }
        for (i, &p) in self.parents.iter().enumerate().skip(1) {
            if p < 0 || p as usize >= i {
                return Err(Error::InvalidSkeleton(format!(
                    "joint {i} has parent {p}; parents must precede children and only joint 0 may be a root"
                )));
            }
        }
        if self.offsets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSkeleton("non-finite offset".into()));
        }
        if let Some(feet) = self.foot_joints {
            for (a, &fa) in feet.iter().enumerate() {
                if fa >= j {
                    return Err(Error::InvalidSkeleton(format!("foot joint {fa} out of range")));
                }
                if feet[..a].contains(&fa) {
                    return Err(Error::InvalidSkeleton("foot joints must be distinct".into()));
                }
            }
        }
        Ok(())
    }

    /// 24-joint SMPL topology.
    pub fn smpl24() -> Self {
        Skeleton {
            name: "smpl24".into(),
            parents: SMPL_PARENTS.to_vec(),
            offsets: SMPL_OFFSETS.to_vec(),
            foot_joints: Some([7, 8, 10, 11]),
            joint_names: SMPL_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// The 22-joint SMPL body without hands.
    pub fn smpl22() -> Self {
        Skeleton {
            name: "smpl22".into(),
            parents: SMPL_PARENTS[..22].to_vec(),
            offsets: SMPL_OFFSETS[..22].to_vec(),
            foot_joints: Some([7, 8, 10, 11]),
            joint_names: SMPL_NAMES[..22].iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Serial chain hanging down from the root, each bone `bone_length` long.
    /// The last four joints act as the foot set when there are at least four.
    pub fn chain(joints: usize, bone_length: f64) -> Result<Self> {
        if joints == 0 {
            return Err(Error::InvalidSkeleton("no joints".into()));
        }
        let parents = (0..joints as i32).map(|i| i - 1).collect();
        let offsets = (0..joints)
            .map(|i| if i == 0 { [0.0; 3] } else { [0.0, -bone_length, 0.0] })
            .collect();
        let feet = (joints >= 4).then(|| {
            let b = joints - 4;
            [b, b + 1, b + 2, b + 3]
        });
        Skeleton::new(format!("chain{joints}"), parents, offsets, feet, Vec::new())
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        let p = self.parents[joint];
        (p >= 0).then_some(p as usize)
    }

    pub fn parents(&self) -> &[i32] {
        &self.parents
    }

    pub fn offset(&self, joint: usize) -> Vec3 {
        self.offsets[joint]
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    pub fn foot_joints(&self) -> Option<[usize; 4]> {
        self.foot_joints
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    /// Sum of all bone lengths from the root to `joint`.
    pub fn chain_length(&self, joint: usize) -> f64 {
        let mut len = 0.0;
        let mut j = joint;
        while let Some(p) = self.parent(j) {
            len += crate::rotations::norm(self.offsets[j]);
            j = p;
        }
        len
    }
}

/// World rotations and positions for one frame given local rotation matrices.
pub fn fk_matrices(skel: &Skeleton, root: Vec3, locals: &[Mat3]) -> (Vec<Vec3>, Vec<Mat3>) {
    let j = skel.joint_count();
    let mut pos = Vec::with_capacity(j);
    let mut world: Vec<Mat3> = Vec::with_capacity(j);
    for i in 0..j {
        match skel.parent(i) {
            None => {
                pos.push(root);
                world.push(locals[i]);
            }
            Some(p) => {
                pos.push(add(pos[p], mat_vec(&world[p], skel.offsets[i])));
                world.push(mat_mul(&world[p], &locals[i]));
            }
        }
    }
    (pos, world)
}

/// Reverse-mode pass of [`fk_matrices`]: returns gradients with respect to
/// the root position and each local rotation matrix.
pub fn fk_matrices_backward(
    skel: &Skeleton,
    locals: &[Mat3],
    world: &[Mat3],
    grad_pos: &[Vec3],
) -> (Vec3, Vec<Mat3>) {
    let j = skel.joint_count();
    let mut gp: Vec<Vec3> = grad_pos.to_vec();
    let mut gw: Vec<Mat3> = vec![[[0.0; 3]; 3]; j];
    let mut gl: Vec<Mat3> = vec![[[0.0; 3]; 3]; j];
    for i in (0..j).rev() {
        match skel.parent(i) {
            None => {
                gl[i] = gw[i];
            }
            Some(p) => {
                // W_i = W_p · L_i
                let wpt = transpose(&world[p]);
                gl[i] = mat_mul(&wpt, &gw[i]);
                let contrib = mat_mul(&gw[i], &transpose(&locals[i]));
                let o = skel.offsets[i];
                for a in 0..3 {
                    for b in 0..3 {
                        gw[p][a][b] += contrib[a][b] + gp[i][a] * o[b];
                    }
                }
                gp[p] = add(gp[p], gp[i]);
            }
        }
    }
    (gp[0], gl)
}

fn pose_locals(skel: &Skeleton, pose: &Pose) -> Result<Vec<Mat3>> {
    if pose.joint_rotations.len() != skel.joint_count() {
        return Err(Error::shape(format!(
            "pose has {} rotations for {} joints",
            pose.joint_rotations.len(),
            skel.joint_count()
        )));
    }
    pose.joint_rotations
        .iter()
        .map(|q| quat_to_matrix(*q).map(|r| r.m))
        .collect()
}

/// Joint positions for one pose.
pub fn forward_kinematics(skel: &Skeleton, pose: &Pose) -> Result<Vec<Vec3>> {
    let locals = pose_locals(skel, pose)?;
    Ok(fk_matrices(skel, pose.root_position, &locals).0)
}

/// Analytic directional derivative of FK along `dir` (forward mode).
pub fn fk_directional_derivative(
    skel: &Skeleton,
    pose: &Pose,
    dir: &PoseTangent,
) -> Result<Vec<Vec3>> {
    let j = skel.joint_count();
    if dir.rotations.len() != j {
        return Err(Error::shape("tangent rotation count mismatch"));
    }
    let locals = pose_locals(skel, pose)?;
    let (_, world) = fk_matrices(skel, pose.root_position, &locals);
    let mut dp: Vec<Vec3> = Vec::with_capacity(j);
    let mut dw: Vec<Mat3> = Vec::with_capacity(j);
    for i in 0..j {
        let dl = mat_mul(&locals[i], &skew(dir.rotations[i]));
        match skel.parent(i) {
            None => {
                dp.push(dir.root);
                dw.push(dl);
            }
            Some(p) => {
                dp.push(add(dp[p], mat_vec(&dw[p], skel.offsets[i])));
                let a = mat_mul(&dw[p], &locals[i]);
                let b = mat_mul(&world[p], &dl);
                let mut m = [[0.0; 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        m[r][c] = a[r][c] + b[r][c];
                    }
                }
                dw.push(m);
            }
        }
    }
    Ok(dp)
}

fn perturbed(pose: &Pose, dir: &PoseTangent, h: f64) -> Pose {
    Pose {
        root_position: add(pose.root_position, crate::rotations::scale(dir.root, h)),
        joint_rotations: pose
            .joint_rotations
            .iter()
            .zip(&dir.rotations)
            .map(|(q, w)| {
                q.mul(axis_angle_to_quat(&AxisAngle::from_array(
                    crate::rotations::scale(*w, h),
                )))
            })
            .collect(),
    }
}

/// Central finite-difference estimate of the FK directional derivative.
pub fn fk_finite_difference(
    skel: &Skeleton,
    pose: &Pose,
    dir: &PoseTangent,
    h: f64,
) -> Result<Vec<Vec3>> {
    let plus = forward_kinematics(skel, &perturbed(pose, dir, h))?;
    let minus = forward_kinematics(skel, &perturbed(pose, dir, -h))?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(a, b)| {
            [
                (a[0] - b[0]) / (2.0 * h),
                (a[1] - b[1]) / (2.0 * h),
                (a[2] - b[2]) / (2.0 * h),
            ]
        })
        .collect())
}

/// Compares the analytic directional derivative with central differences.
/// The error is `‖analytic − numeric‖∞ / max(‖numeric‖∞, 1e-12)`.
pub fn fk_jacobian_check(
    skel: &Skeleton,
    pose: &Pose,
    dir: &PoseTangent,
    h: f64,
) -> Result<JacobianCheck> {
    let analytic = fk_directional_derivative(skel, pose, dir)?;
    let numeric = fk_finite_difference(skel, pose, dir, h)?;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (a, n) in analytic.iter().zip(&numeric) {
        for k in 0..3 {
            diff = diff.max((a[k] - n[k]).abs());
            scale = scale.max(n[k].abs());
        }
    }
    Ok(JacobianCheck {
        analytic,
        numeric,
        max_rel_error: diff / scale.max(1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotations::{cross, norm, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn two_chain() -> Skeleton {
        Skeleton::new(
            "two",
            vec![-1, 0],
            vec![[0.0; 3], [0.0, 1.0, 0.0]],
            None,
            vec![],
        )
        .unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng, j: usize) -> Pose {
        Pose {
            root_position: [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ],
            joint_rotations: (0..j).map(|_| Quaternion::random(rng)).collect(),
        }
    }

    #[test]
    fn two_joint_identity_and_quarter_turn() {
        let s = two_chain();
        let p = forward_kinematics(&s, &Pose::identity(2)).unwrap();
        assert_eq!(p, vec![[0.0; 3], [0.0, 1.0, 0.0]]);
        let mut pose = Pose::identity(2);
        pose.joint_rotations[0] = Quaternion::new(FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2).unwrap();
        let p = forward_kinematics(&s, &pose).unwrap();
        assert!((p[1][0] + 1.0).abs() < 1e-15 && p[1][1].abs() < 1e-15);
    }

    #[test]
    fn rest_pose_is_sum_of_ancestor_offsets() {
        let s = Skeleton::smpl24();
        let p = forward_kinematics(&s, &Pose::identity(24)).unwrap();
        for j in 0..24 {
            // brute-force walk up the tree
            let mut expected = [0.0; 3];
            let mut k = j;
            loop {
                expected = add(expected, s.offset(k));
                match s.parent(k) {
                    Some(pk) => k = pk,
                    None => break,
                }
            }
            for c in 0..3 {
                assert!((p[j][c] - expected[c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn invalid_skeletons_rejected() {
        assert!(Skeleton::new("x", vec![0], vec![[0.0; 3]], None, vec![]).is_err());
        assert!(Skeleton::new("x", vec![-1, 1], vec![[0.0; 3]; 2], None, vec![]).is_err());
        assert!(Skeleton::new("x", vec![-1, -1], vec![[0.0; 3]; 2], None, vec![]).is_err());
        assert!(Skeleton::new("x", vec![-1, 0], vec![[0.0; 3]; 2], Some([0, 1, 1, 0]), vec![]).is_err());
        assert!(Skeleton::chain(4, 0.25).unwrap().foot_joints() == Some([0, 1, 2, 3]));
        assert!(Skeleton::smpl22().validate().is_ok());
        assert_eq!(Skeleton::smpl24().joint_count(), 24);
    }

    #[test]
    fn equivariance_and_bone_lengths() {
        let s = Skeleton::smpl24();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let pose = random_pose(&mut rng, 24);
            let p = forward_kinematics(&s, &pose).unwrap();
            let d = [0.3, -1.2, 2.0];
            let mut shifted = pose.clone();
            shifted.root_position = add(pose.root_position, d);
            let ps = forward_kinematics(&s, &shifted).unwrap();
            for j in 0..24 {
                for c in 0..3 {
                    assert!((ps[j][c] - p[j][c] - d[c]).abs() < 1e-12);
                }
                if let Some(par) = s.parent(j) {
                    let bone = norm(sub(p[j], p[par]));
                    assert!((bone - norm(s.offset(j))).abs() < 1e-12);
                }
            }
            let qr = Quaternion::random(&mut rng);
            let mut rotated = pose.clone();
            rotated.joint_rotations[0] = qr.mul(pose.joint_rotations[0]);
            let pr = forward_kinematics(&s, &rotated).unwrap();
            for j in 0..24 {
                let expect = qr.rotate(sub(p[j], pose.root_position));
                let got = sub(pr[j], pose.root_position);
                for c in 0..3 {
                    assert!((expect[c] - got[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn root_translation_derivative_is_uniform() {
        let s = Skeleton::smpl24();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pose = random_pose(&mut rng, 24);
        let dir = PoseTangent {
            root: [0.2, -0.5, 1.0],
            rotations: vec![[0.0; 3]; 24],
        };
        let d = fk_directional_derivative(&s, &pose, &dir).unwrap();
        for v in d {
            assert_eq!(v, [0.2, -0.5, 1.0]);
        }
    }

    #[test]
    fn root_spin_gives_tangential_velocity() {
        let s = Skeleton::smpl24();
        let pose = Pose::identity(24);
        let omega = [0.0, 0.0, 1.0];
        let mut rotations = vec![[0.0; 3]; 24];
        rotations[0] = omega;
        let dir = PoseTangent {
            root: [0.0; 3],
            rotations,
        };
        let d = fk_directional_derivative(&s, &pose, &dir).unwrap();
        let p = forward_kinematics(&s, &pose).unwrap();
        for j in 0..24 {
            let expect = cross(omega, p[j]);
            for c in 0..3 {
                assert!((d[j][c] - expect[c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn random_directions_match_finite_differences() {
        let s = Skeleton::smpl24();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..25 {
            let pose = random_pose(&mut rng, 24);
            let dir = PoseTangent {
                root: [rng.random_range(-1.0..1.0), 0.1, rng.random_range(-1.0..1.0)],
                rotations: (0..24)
                    .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                    .collect(),
            };
            let chk = fk_jacobian_check(&s, &pose, &dir, 1e-5).unwrap();
            assert!(chk.max_rel_error < 1e-4, "{}", chk.max_rel_error);
        }
    }

    #[test]
    fn backward_matches_directional_derivative() {
        // <grad, d pos> computed two ways
        let s = Skeleton::smpl22();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pose = random_pose(&mut rng, 22);
        let locals: Vec<Mat3> = pose
            .joint_rotations
            .iter()
            .map(|q| quat_to_matrix(*q).unwrap().m)
            .collect();
        let (_, world) = fk_matrices(&s, pose.root_position, &locals);
        let gpos: Vec<Vec3> = (0..22)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let (groot, glocal) = fk_matrices_backward(&s, &locals, &world, &gpos);
        let dir = PoseTangent {
            root: [0.4, 0.1, -0.3],
            rotations: (0..22)
                .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                .collect(),
        };
        let d = fk_directional_derivative(&s, &pose, &dir).unwrap();
        let lhs: f64 = gpos.iter().zip(&d).map(|(g, v)| crate::rotations::dot(*g, *v)).sum();
        let mut rhs = crate::rotations::dot(groot, dir.root);
        for j in 0..22 {
            let dl = mat_mul(&locals[j], &skew(dir.rotations[j]));
            for a in 0..3 {
                for b in 0..3 {
                    rhs += glocal[j][a][b] * dl[a][b];
                }
            }
        }
        assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
    }
}
