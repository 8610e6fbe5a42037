//! Helpers shared by the integration tests.
#![allow(dead_code)]

use motiondiff::rotations::{axis_angle_to_quat, AxisAngle, Quaternion, Vec3};
use motiondiff::{MotionClip, Skeleton};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// Random tree: each joint hangs off an earlier one. Joints `J−4..J` are
/// the feet when there are at least four.
pub fn random_skeleton<R: Rng>(rng: &mut R, joints: usize) -> Skeleton {
    let parents = (0..joints).map(|i| if i == 0 { -1 } else { rng.random_range(0..i) as i32 }).collect();
    let offsets = (0..joints)
        .map(|i| if i == 0 { [0.0; 3] } else { [0.3 * normal(rng), 0.3 * normal(rng), 0.3 * normal(rng)] })
        .collect();
    let feet = (joints >= 4).then(|| [joints - 4, joints - 3, joints - 2, joints - 1]);
    Skeleton::new(format!("random{joints}"), parents, offsets, feet, Vec::new()).unwrap()
}

/// Clip whose joints turn at a random constant angular velocity from a
/// random start pose, with a random-walk root.
pub fn random_clip<R: Rng>(rng: &mut R, joints: usize, frames: usize) -> MotionClip {
    let start: Vec<Quaternion> = (0..joints).map(|_| Quaternion::random(rng)).collect();
    let omega: Vec<Vec3> = (0..joints).map(|_| [0.2 * normal(rng), 0.2 * normal(rng), 0.2 * normal(rng)]).collect();
    let mut root = [normal(rng), normal(rng), normal(rng)];
    let mut roots = Vec::with_capacity(frames);
    let mut rots = Vec::with_capacity(frames);
    for f in 0..frames {
        let t = f as f64;
        rots.push(
            start
                .iter()
                .zip(&omega)
                .map(|(q, w)| axis_angle_to_quat(&AxisAngle::new(w[0] * t, w[1] * t, w[2] * t)).mul(*q))
                .collect(),
        );
        roots.push(root);
        for c in &mut root {
            *c += 0.05 * normal(rng);
        }
    }
    MotionClip::new(30.0, roots, rots).unwrap()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute error when both are tiny.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-8)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_position_error(a: &[Vec<Vec3>], b: &[Vec<Vec3>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).abs()))
        .fold(0.0, f64::max)
}
