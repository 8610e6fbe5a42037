//! Poses the SMPL skeleton and checks the analytic FK derivative against
//! finite differences.

use motiondiff::rotations::{axis_angle_to_quat, AxisAngle};
use motiondiff::skeleton::{fk_jacobian_check, forward_kinematics, Pose, PoseTangent};
use motiondiff::Skeleton;

fn main() -> motiondiff::Result<()> {
    let skel = Skeleton::smpl24();
    let mut pose = Pose::identity(skel.joint_count());
    pose.root_position = [0.0, 0.9, 0.0];
    // bend both knees and raise the left arm
    pose.joint_rotations[4] = axis_angle_to_quat(&AxisAngle::new(0.6, 0.0, 0.0));
    pose.joint_rotations[5] = axis_angle_to_quat(&AxisAngle::new(0.6, 0.0, 0.0));
    pose.joint_rotations[16] = axis_angle_to_quat(&AxisAngle::new(0.0, 0.0, -1.2));
    let positions = forward_kinematics(&skel, &pose)?;
    for (name, p) in skel.joint_names().iter().zip(&positions) {
        println!("{name:>16}  {:+.4} {:+.4} {:+.4}", p[0], p[1], p[2]);
    }
    let dir = PoseTangent {
        root: [0.1, 0.0, -0.2],
        rotations: (0..skel.joint_count()).map(|j| [0.3, -0.1 * j as f64, 0.2]).collect(),
    };
    let check = fk_jacobian_check(&skel, &pose, &dir, 1e-6)?;
    println!("directional derivative vs finite difference: max relative error {:.2e}", check.max_rel_error);
    Ok(())
}
