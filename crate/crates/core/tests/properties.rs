mod common;

use motiondiff::postprocess::{smooth_signal, SmootherConfig};
use motiondiff::representation::{decode_positions, encode, Normalizer, ReprKind};
use motiondiff::rotations::{matrix_to_quat, matrix_to_sixd, quat_to_matrix, sixd_to_matrix, Quaternion};
use motiondiff::skeleton::{forward_kinematics, Pose};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_quat() -> impl Strategy<Value = Quaternion> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
        .prop_map(|(w, x, y, z)| Quaternion::normalized(w, x, y, z).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sixd_survives_scaling(q in unit_quat(), a in 0.1f64..10.0, b in 0.1f64..10.0) {
        let r = quat_to_matrix(q).unwrap();
        let mut s = matrix_to_sixd(&r);
        s.0[..3].iter_mut().for_each(|v| *v *= a);
        s.0[3..].iter_mut().for_each(|v| *v *= b);
        prop_assert!(sixd_to_matrix(&s).unwrap().max_abs_diff(&r) < 1e-12);
    }

    #[test]
    fn matrix_quat_double_cover(q in unit_quat()) {
        let back = matrix_to_quat(&quat_to_matrix(q).unwrap());
        let d = q.dot(back).abs();
        prop_assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smoothing_preserves_affine_interior(a in -5.0f64..5.0, b in -5.0f64..5.0, sigma in 0.5f64..3.0, n in 30usize..60) {
        let cfg = SmootherConfig { sigma, ..Default::default() };
        let x: Vec<f64> = (0..n).map(|i| a * i as f64 + b).collect();
        let y = smooth_signal(&x, &cfg).unwrap();
        let r = cfg.radius();
        for i in r..n.saturating_sub(r) {
            prop_assert!((y[i] - x[i]).abs() < 1e-9 * (1.0 + x[i].abs()));
        }
    }

    #[test]
    fn root_translation_moves_every_joint(seed in 0u64..1000, dx in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let skel = common::random_skeleton(&mut rng, 6);
        let clip = common::random_clip(&mut rng, 6, 1);
        let mut pose: Pose = clip.pose(0);
        let a = forward_kinematics(&skel, &pose).unwrap();
        pose.root_position[0] += dx;
        let b = forward_kinematics(&skel, &pose).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((q[0] - p[0] - dx).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn codec_is_consistent_across_kinds(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let skel = common::random_skeleton(&mut rng, 5);
        let clip = common::random_clip(&mut rng, 5, 4);
        let reference = decode_positions(&encode(&clip, ReprKind::Rpmjr, &skel).unwrap(), &skel).unwrap();
        for kind in [ReprKind::Rp6jr, ReprKind::Rpqjr, ReprKind::Rpajr, ReprKind::Rpejr] {
            let pos = decode_positions(&encode(&clip, kind, &skel).unwrap(), &skel).unwrap();
            prop_assert!(common::max_position_error(&reference, &pos) < 1e-9);
        }
    }
}

#[test]
fn normalizer_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let skel = common::random_skeleton(&mut rng, 4);
    let set: Vec<_> = (0..10).map(|_| encode(&common::random_clip(&mut rng, 4, 6), ReprKind::Rp6jr, &skel).unwrap()).collect();
    let n = Normalizer::fit(&set).unwrap();
    for fm in &set {
        let back = n.denormalize(&n.normalize(fm));
        assert!(back.data.iter().zip(&fm.data).all(|(a, b)| (a - b).abs() < 1e-12));
    }
    // padded root features are constant zero and must not blow up
    assert!(n.std.iter().all(|s| s.is_finite() && *s > 0.0));
}
