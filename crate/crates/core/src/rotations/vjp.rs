//! Vector-Jacobian products of the raw-feature → rotation-matrix projections
//! used at decode time. Each function takes the raw feature block and the
//! gradient of a scalar loss with respect to the resulting matrix, and returns
//! the gradient with respect to the raw features.

use super::{
    cross, dot, mat_mul, norm, rodrigues_coefficients, rx, ry, rz, scale, skew, sub, transpose,
    unit_quat_to_mat3, Mat3, Vec3,
};
use crate::error::{Error, Result};

fn frob(a: &Mat3, b: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// Raw quaternion → normalize → matrix.
pub fn quat_raw_to_matrix(q: [f64; 4]) -> Result<Mat3> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if !n.is_finite() || n < 1e-12 {
        return Err(Error::InvalidRotation(format!("quaternion norm {n:e}")));
    }
    let u = super::Quaternion::from_array([q[0] / n, q[1] / n, q[2] / n, q[3] / n]);
    Ok(unit_quat_to_mat3(u))
}

pub fn quat_raw_to_matrix_vjp(q: [f64; 4], g: &Mat3) -> [f64; 4] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    let gw = 2.0 * (-z * g[0][1] + y * g[0][2] + z * g[1][0] - x * g[1][2] - y * g[2][0]
        + x * g[2][1]);
    let gx = 2.0
        * (y * g[0][1] + z * g[0][2] + y * g[1][0] - 2.0 * x * g[1][1] - w * g[1][2]
            + z * g[2][0]
            + w * g[2][1]
            - 2.0 * x * g[2][2]);
    let gy = 2.0
        * (-2.0 * y * g[0][0] + x * g[0][1] + w * g[0][2] + x * g[1][0] + z * g[1][2]
            - w * g[2][0]
            + z * g[2][1]
            - 2.0 * y * g[2][2]);
    let gz = 2.0
        * (-2.0 * z * g[0][0] - w * g[0][1] + x * g[0][2] + w * g[1][0] - 2.0 * z * g[1][1]
            + y * g[1][2]
            + x * g[2][0]
            + y * g[2][1]);
    let gu = [gw, gx, gy, gz];
    let u = [w, x, y, z];
    let proj: f64 = (0..4).map(|i| u[i] * gu[i]).sum();
    [
        (gu[0] - u[0] * proj) / n,
        (gu[1] - u[1] * proj) / n,
        (gu[2] - u[2] * proj) / n,
        (gu[3] - u[3] * proj) / n,
    ]
}

/// Gradient of the Gram–Schmidt 6D decode.
pub fn sixd_to_matrix_vjp(s: [f64; 6], g: &Mat3) -> [f64; 6] {
    let a1 = [s[0], s[1], s[2]];
    let a2 = [s[3], s[4], s[5]];
    let n1 = norm(a1);
    let b1 = scale(a1, 1.0 / n1);
    let d = dot(b1, a2);
    let u = sub(a2, scale(b1, d));
    let n2 = norm(u);
    let b2 = scale(u, 1.0 / n2);

    let col = |k: usize| -> Vec3 { [g[0][k], g[1][k], g[2][k]] };
    let (g1, g2, g3) = (col(0), col(1), col(2));

    let mut gb1 = super::add(g1, cross(b2, g3));
    let gb2 = super::add(g2, cross(g3, b1));

    let gu = scale(sub(gb2, scale(b2, dot(b2, gb2))), 1.0 / n2);
    let mut ga2 = gu;
    let gd = -dot(gu, b1);
    gb1 = super::add(gb1, scale(gu, -d));
    gb1 = super::add(gb1, scale(a2, gd));
    ga2 = super::add(ga2, scale(b1, gd));
    let ga1 = scale(sub(gb1, scale(b1, dot(b1, gb1))), 1.0 / n1);
    [ga1[0], ga1[1], ga1[2], ga2[0], ga2[1], ga2[2]]
}

/// Gradient of the Rodrigues map `r ↦ exp([r]×)`.
pub fn axis_angle_to_matrix_vjp(r: Vec3, g: &Mat3) -> Vec3 {
    let theta = norm(r);
    let (a, b) = rodrigues_coefficients(theta);
    // derivatives of the coefficients divided by θ
    let (da, db) = if theta < 1e-3 {
        let t2 = theta * theta;
        (
            -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0,
            -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0,
        )
    } else {
        let (st, ct) = theta.sin_cos();
        (
            (theta * ct - st) / theta.powi(3),
            (theta * st - 2.0 * (1.0 - ct)) / theta.powi(4),
        )
    };
    let k = skew(r);
    let k2 = mat_mul(&k, &k);
    let gk = frob(g, &k);
    let gk2 = frob(g, &k2);
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        let ei = skew(e);
        let ek = mat_mul(&ei, &k);
        let ke = mat_mul(&k, &ei);
        let mut sym = [[0.0; 3]; 3];
        for p in 0..3 {
            for q in 0..3 {
                sym[p][q] = ek[p][q] + ke[p][q];
            }
        }
        *o = da * r[i] * gk + a * frob(g, &ei) + db * r[i] * gk2 + b * frob(g, &sym);
    }
    out
}

fn drx(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]]
}

fn dry(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]]
}

fn drz(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]]
}

/// Gradient of the intrinsic X-Y-Z Euler composition.
pub fn euler_to_matrix_vjp(e: Vec3, g: &Mat3) -> Vec3 {
    let (x, y, z) = (rx(e[0]), ry(e[1]), rz(e[2]));
    [
        frob(g, &mat_mul(&mat_mul(&drx(e[0]), &y), &z)),
        frob(g, &mat_mul(&mat_mul(&x, &dry(e[1])), &z)),
        frob(g, &mat_mul(&mat_mul(&x, &y), &drz(e[2]))),
    ]
}

/// Gradient of the polar projection `M ↦ R` with `M = R·S`, `S` symmetric.
pub fn polar_projection_vjp(m: &Mat3, r: &Mat3, g: &Mat3) -> Result<Mat3> {
    let rt = transpose(r);
    let s = mat_mul(&rt, m);
    let sym = nalgebra::Matrix3::from_fn(|i, j| 0.5 * (s[i][j] + s[j][i]));
    let eig = sym.symmetric_eigen();
    let v = eig.eigenvectors;
    let ev = eig.eigenvalues;
    let h = mat_mul(&rt, g);
    let hm = nalgebra::Matrix3::from_fn(|i, j| h[i][j]);
    let mut x = v.transpose() * hm * v;
    for i in 0..3 {
        for j in 0..3 {
            let denom = ev[i] + ev[j];
            if denom.abs() < 1e-12 {
                return Err(Error::InvalidRotation(
                    "polar projection is not differentiable here".into(),
                ));
            }
            x[(i, j)] /= denom;
        }
    }
    let k = v * x * v.transpose();
    let kk = k - k.transpose();
    let rm = nalgebra::Matrix3::from_fn(|i, j| r[i][j]);
    let out = rm * kk;
    Ok([
        [out[(0, 0)], out[(0, 1)], out[(0, 2)]],
        [out[(1, 0)], out[(1, 1)], out[(1, 2)]],
        [out[(2, 0)], out[(2, 1)], out[(2, 2)]],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotations::{
        axis_angle_to_matrix, euler_to_matrix, project_to_rotation, sixd_to_matrix, AxisAngle,
        EulerAngles, SixD,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const H: f64 = 1e-6;

    fn rand_g(rng: &mut ChaCha8Rng) -> Mat3 {
        let mut g = [[0.0; 3]; 3];
        for row in g.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        g
    }

    fn check<const K: usize>(
        x: [f64; K],
        analytic: [f64; K],
        f: impl Fn([f64; K]) -> Mat3,
        g: &Mat3,
    ) {
        for i in 0..K {
            let mut p = x;
            let mut m = x;
            p[i] += H;
            m[i] -= H;
            let fd = (frob(g, &f(p)) - frob(g, &f(m))) / (2.0 * H);
            let err = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-3);
            assert!(err < 1e-6, "component {i}: fd {fd} vs analytic {}", analytic[i]);
        }
    }

    #[test]
    fn quaternion_vjp_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
            let g = rand_g(&mut rng);
            check(q, quat_raw_to_matrix_vjp(q, &g), |q| quat_raw_to_matrix(q).unwrap(), &g);
        }
    }

    #[test]
    fn sixd_vjp_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let s: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
            let g = rand_g(&mut rng);
            check(s, sixd_to_matrix_vjp(s, &g), |s| sixd_to_matrix(&SixD(s)).unwrap().m, &g);
        }
    }

    #[test]
    fn axis_angle_vjp_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..60 {
            let amp = if i < 10 { 1e-5 } else { 3.0 };
            let r: [f64; 3] = std::array::from_fn(|_| rng.random_range(-amp..amp));
            let g = rand_g(&mut rng);
            check(
                r,
                axis_angle_to_matrix_vjp(r, &g),
                |r| axis_angle_to_matrix(&AxisAngle::from_array(r)).m,
                &g,
            );
        }
        // exactly zero
        let g = rand_g(&mut rng);
        check(
            [0.0; 3],
            axis_angle_to_matrix_vjp([0.0; 3], &g),
            |r| axis_angle_to_matrix(&AxisAngle::from_array(r)).m,
            &g,
        );
    }

    #[test]
    fn euler_vjp_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let e: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let g = rand_g(&mut rng);
            check(
                e,
                euler_to_matrix_vjp(e, &g),
                |e| euler_to_matrix(&EulerAngles { ex: e[0], ey: e[1], ez: e[2] }).m,
                &g,
            );
        }
    }

    #[test]
    fn polar_vjp_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let flat: [f64; 9] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let m = crate::rotations::RotationMatrix::flat_to_mat3(&flat);
            let r = project_to_rotation(&m).unwrap().m;
            let g = rand_g(&mut rng);
            let an = polar_projection_vjp(&m, &r, &g).unwrap();
            let an_flat: [f64; 9] = std::array::from_fn(|k| an[k / 3][k % 3]);
            check(
                flat,
                an_flat,
                |f| project_to_rotation(&crate::rotations::RotationMatrix::flat_to_mat3(&f)).unwrap().m,
                &g,
            );
        }
    }
}
