//! Converts one rotation through every supported formalism and shows why
//! sign continuity matters for quaternion sequences.

use motiondiff::rotations::{
    axis_angle_to_quat, enforce_quat_continuity, matrix_to_euler, matrix_to_sixd, quat_to_axis_angle,
    quat_to_matrix, sixd_to_matrix, AxisAngle,
};

fn main() -> motiondiff::Result<()> {
    let q = axis_angle_to_quat(&AxisAngle::new(0.3, -1.1, 0.7));
    let r = quat_to_matrix(q)?;
    let six = matrix_to_sixd(&r);
    let e = matrix_to_euler(&r);
    println!("quaternion  {:?}", q.to_array());
    println!("axis-angle  {:?}", quat_to_axis_angle(q).to_array());
    println!("euler xyz   {:?} (gimbal lock: {})", e.angles.to_array(), e.gimbal_lock);
    println!("6d          {:?}", six.0);
    println!("6d -> matrix error {:.2e}", sixd_to_matrix(&six)?.max_abs_diff(&r));

    // a slow spin whose samples were stored with arbitrary signs
    let seq: Vec<_> = (0..6)
        .map(|i| {
            let q = axis_angle_to_quat(&AxisAngle::new(0.0, 0.0, 0.4 * i as f64));
            if i % 2 == 1 { q.neg() } else { q }
        })
        .collect();
    let fixed = enforce_quat_continuity(&seq);
    for (a, b) in seq.iter().zip(&fixed) {
        println!("w {:+.3} -> {:+.3}", a.w, b.w);
    }
    Ok(())
}
