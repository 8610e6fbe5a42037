//! Rotation formalisms used by the motion representations and conversions
//! between them.
//!
//! Conventions used throughout the crate:
//!
//! * quaternions are scalar-first `(w, x, y, z)`;
//! * rotation matrices are row-major and act on column vectors;
//! * Euler angles are intrinsic X-Y-Z, `R = Rx(ex) · Ry(ey) · Rz(ez)`;
//! * the 6D form stores the first two matrix columns, column-major;
//! * every angle is in radians.
//!
//! All functions are pure and operate on small `Copy` value types.

pub mod vjp;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Tolerance on `|‖q‖ − 1|` accepted by [`quat_to_matrix`].
pub const UNIT_TOLERANCE: f64 = 1e-6;
/// Degeneracy threshold for 6D decoding.
pub const SIXD_DEGENERATE: f64 = 1e-12;
/// `cos(pitch)` below this value is treated as gimbal lock.
pub const GIMBAL_EPS: f64 = 1e-10;

/// Fixed Euler order. Only intrinsic X-Y-Z is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EulerOrder {
    IntrinsicXyz,
}

pub const EULER_ORDER: EulerOrder = EulerOrder::IntrinsicXyz;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub ex: f64,
    pub ey: f64,
    pub ez: f64,
}

/// Result of [`matrix_to_euler`]: the angles plus a gimbal-lock flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerExtraction {
    pub angles: EulerAngles,
    pub gimbal_lock: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix {
    pub m: Mat3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixD(pub [f64; 6]);

// ---------------------------------------------------------------------------
// small 3-vector / 3x3 helpers

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub(crate) fn mat_vec(a: &Mat3, v: Vec3) -> Vec3 {
    [dot(a[0], v), dot(a[1], v), dot(a[2], v)]
}

pub(crate) fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub(crate) fn det(a: &Mat3) -> f64 {
    dot(a[0], cross(a[1], a[2]))
}

pub(crate) fn skew(v: Vec3) -> Mat3 {
    [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
}

pub(crate) const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn wrap_angle(a: f64) -> f64 {
    // (-pi, pi]
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

// ---------------------------------------------------------------------------
// Quaternion

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a quaternion from nearly-unit components and renormalizes it.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Quaternion { w, x, y, z };
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidRotation(format!(
                "quaternion norm {n} is not unit"
            )));
        }
        Ok(q.scaled(1.0 / n))
    }

    /// Normalizes arbitrary nonzero components.
    pub fn normalized(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Quaternion { w, x, y, z };
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidRotation(format!(
                "cannot normalize quaternion with norm {n}"
            )));
        }
        Ok(q.scaled(1.0 / n))
    }

    /// Uniformly distributed unit quaternion.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let c: [f64; 4] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            if let Ok(q) = Quaternion::normalized(c[0], c[1], c[2], c[3]) {
                return q;
            }
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion {
            w: a[0],
            x: a[1],
            y: a[2],
            z: a[3],
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, o: Quaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn neg(self) -> Self {
        self.scaled(-1.0)
    }

    fn scaled(self, s: f64) -> Self {
        Quaternion {
            w: self.w * s,
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
        }
    }

    /// Hamilton product `self ⊗ o`.
    pub fn mul(self, o: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn conjugate(self) -> Quaternion {
        Quaternion {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let p = Quaternion {
            w: 0.0,
            x: v[0],
            y: v[1],
            z: v[2],
        };
        let r = self.mul(p).mul(self.conjugate());
        [r.x, r.y, r.z]
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

// ---------------------------------------------------------------------------
// RotationMatrix

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix { m: IDENTITY };

    /// Validates orthonormality and `det = +1` within `tol`.
    pub fn new(m: Mat3, tol: f64) -> Result<Self> {
        let r = RotationMatrix { m };
        let err = r.orthonormality_error();
        if !err.is_finite() || err > tol {
            return Err(Error::InvalidRotation(format!(
                "matrix is not a rotation (error {err:e})"
            )));
        }
        Ok(r)
    }

    pub fn from_rows_unchecked(m: Mat3) -> Self {
        RotationMatrix { m }
    }

    /// `max(‖RᵀR − I‖∞, |det R − 1|)`.
    pub fn orthonormality_error(&self) -> f64 {
        let rtr = mat_mul(&transpose(&self.m), &self.m);
        let mut err: f64 = 0.0;
        for (i, row) in rtr.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                err = err.max((v - IDENTITY[i][j]).abs());
            }
        }
        err.max((det(&self.m) - 1.0).abs())
    }

    pub fn mul(&self, o: &RotationMatrix) -> RotationMatrix {
        RotationMatrix {
            m: mat_mul(&self.m, &o.m),
        }
    }

    pub fn transpose(&self) -> RotationMatrix {
        RotationMatrix {
            m: transpose(&self.m),
        }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        mat_vec(&self.m, v)
    }

    pub fn max_abs_diff(&self, o: &RotationMatrix) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.m[i][j] - o.m[i][j]).abs());
            }
        }
        d
    }

    /// Row-major flattening.
    pub fn to_flat(&self) -> [f64; 9] {
        let m = &self.m;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }

    pub fn flat_to_mat3(f: &[f64]) -> Mat3 {
        [[f[0], f[1], f[2]], [f[3], f[4], f[5]], [f[6], f[7], f[8]]]
    }
}

impl AxisAngle {
    pub fn new(rx: f64, ry: f64, rz: f64) -> Self {
        AxisAngle { rx, ry, rz }
    }

    pub fn to_array(self) -> Vec3 {
        [self.rx, self.ry, self.rz]
    }

    pub fn from_array(a: Vec3) -> Self {
        AxisAngle::new(a[0], a[1], a[2])
    }

    pub fn angle(self) -> f64 {
        norm(self.to_array())
    }

    /// Maps the rotation vector to an equivalent one with angle in `[0, π]`.
    pub fn canonicalize(self) -> AxisAngle {
        let v = self.to_array();
        let theta = norm(v);
        if theta <= PI {
            if theta == PI {
                return AxisAngle::from_array(scale(pi_axis_convention(scale(v, 1.0 / theta)), PI));
            }
            return self;
        }
        let axis = scale(v, 1.0 / theta);
        let mut t = theta.rem_euclid(2.0 * PI);
        let mut axis = axis;
        if t > PI {
            t = 2.0 * PI - t;
            axis = scale(axis, -1.0);
        }
        if t == PI {
            axis = pi_axis_convention(axis);
        }
        AxisAngle::from_array(scale(axis, t))
    }
}

/// Sign convention for a half-turn axis: largest-magnitude component positive.
fn pi_axis_convention(axis: Vec3) -> Vec3 {
    let mut idx = 0;
    for i in 1..3 {
        if axis[i].abs() > axis[idx].abs() {
            idx = i;
        }
    }
    if axis[idx] < 0.0 {
        scale(axis, -1.0)
    } else {
        axis
    }
}

impl EulerAngles {
    /// Wraps each component into `(−π, π]`.
    pub fn new(ex: f64, ey: f64, ez: f64) -> Self {
        EulerAngles {
            ex: wrap_angle(ex),
            ey: wrap_angle(ey),
            ez: wrap_angle(ez),
        }
    }

    pub fn to_array(self) -> Vec3 {
        [self.ex, self.ey, self.ez]
    }
}

// ---------------------------------------------------------------------------
// conversions

pub(crate) fn unit_quat_to_mat3(q: Quaternion) -> Mat3 {
    let Quaternion { w, x, y, z } = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

pub fn quat_to_matrix(q: Quaternion) -> Result<RotationMatrix> {
    let n = q.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::InvalidRotation(format!(
            "quaternion norm {n} is not unit"
        )));
    }
    Ok(RotationMatrix {
        m: unit_quat_to_mat3(q.scaled(1.0 / n)),
    })
}

/// Shepperd's method; the result is normalized and has an arbitrary sign.
pub fn matrix_to_quat(r: &RotationMatrix) -> Quaternion {
    let m = &r.m;
    let tr = m[0][0] + m[1][1] + m[2][2];
    let (w, x, y, z);
    if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[2][1] - m[1][2]) / s;
        y = (m[0][2] - m[2][0]) / s;
        z = (m[1][0] - m[0][1]) / s;
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        w = (m[2][1] - m[1][2]) / s;
        x = 0.25 * s;
        y = (m[0][1] + m[1][0]) / s;
        z = (m[0][2] + m[2][0]) / s;
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        w = (m[0][2] - m[2][0]) / s;
        x = (m[0][1] + m[1][0]) / s;
        y = 0.25 * s;
        z = (m[1][2] + m[2][1]) / s;
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        w = (m[1][0] - m[0][1]) / s;
        x = (m[0][2] + m[2][0]) / s;
        y = (m[1][2] + m[2][1]) / s;
        z = 0.25 * s;
    }
    let q = Quaternion { w, x, y, z };
    q.scaled(1.0 / q.norm())
}

pub fn matrix_to_sixd(r: &RotationMatrix) -> SixD {
    let m = &r.m;
    SixD([m[0][0], m[1][0], m[2][0], m[0][1], m[1][1], m[2][1]])
}

/// Gram–Schmidt decoding: normalize `a1`, orthogonalize and normalize `a2`,
/// complete with the cross product.
pub fn sixd_to_matrix(s: &SixD) -> Result<RotationMatrix> {
    let a1 = [s.0[0], s.0[1], s.0[2]];
    let a2 = [s.0[3], s.0[4], s.0[5]];
    if !s.0.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateSixD("non-finite component".into()));
    }
    let n1 = norm(a1);
    if n1 < SIXD_DEGENERATE {
        return Err(Error::DegenerateSixD(format!("|a1| = {n1:e}")));
    }
    let b1 = scale(a1, 1.0 / n1);
    let u = sub(a2, scale(b1, dot(b1, a2)));
    let n2 = norm(u);
    let na2 = norm(a2);
    if na2 < SIXD_DEGENERATE || n2 <= SIXD_DEGENERATE * na2 {
        return Err(Error::DegenerateSixD("columns are parallel".into()));
    }
    let b2 = scale(u, 1.0 / n2);
    let b3 = cross(b1, b2);
    Ok(RotationMatrix {
        m: [
            [b1[0], b2[0], b3[0]],
            [b1[1], b2[1], b3[1]],
            [b1[2], b2[2], b3[2]],
        ],
    })
}

pub(crate) fn rx(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

pub(crate) fn ry(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub(crate) fn rz(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// `R = Rx(ex) · Ry(ey) · Rz(ez)`; any finite angles.
pub fn euler_to_matrix(e: &EulerAngles) -> RotationMatrix {
    RotationMatrix {
        m: mat_mul(&mat_mul(&rx(e.ex), &ry(e.ey)), &rz(e.ez)),
    }
}

/// Inverse of [`euler_to_matrix`]. In gimbal lock the roll (`ex`) is set to
/// zero and the whole ambiguity is assigned to `ez`.
pub fn matrix_to_euler(r: &RotationMatrix) -> EulerExtraction {
    let m = &r.m;
    let cy = (m[0][0] * m[0][0] + m[0][1] * m[0][1]).sqrt();
    let ey = m[0][2].clamp(-1.0, 1.0).atan2(cy);
    if cy < GIMBAL_EPS {
        let ez = m[1][0].atan2(m[1][1]);
        return EulerExtraction {
            angles: EulerAngles::new(0.0, ey, ez),
            gimbal_lock: true,
        };
    }
    let ex = (-m[1][2]).atan2(m[2][2]);
    let ez = (-m[0][1]).atan2(m[0][0]);
    EulerExtraction {
        angles: EulerAngles::new(ex, ey, ez),
        gimbal_lock: false,
    }
}

/// Rodrigues formula.
pub fn axis_angle_to_matrix(a: &AxisAngle) -> RotationMatrix {
    let v = a.to_array();
    let theta = norm(v);
    let (sa, sb) = rodrigues_coefficients(theta);
    let k = skew(v);
    let k2 = mat_mul(&k, &k);
    let mut m = IDENTITY;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += sa * k[i][j] + sb * k2[i][j];
        }
    }
    RotationMatrix { m }
}

/// `(sin θ / θ, (1 − cos θ) / θ²)` with a series near zero.
pub(crate) fn rodrigues_coefficients(theta: f64) -> (f64, f64) {
    if theta < 1e-4 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    }
}

/// Logarithm map with angle in `[0, π]`.
pub fn matrix_to_axis_angle(r: &RotationMatrix) -> AxisAngle {
    quat_to_axis_angle(matrix_to_quat(r))
}

pub fn quat_to_axis_angle(q: Quaternion) -> AxisAngle {
    let q = if q.w < 0.0 { q.neg() } else { q };
    let v = [q.x, q.y, q.z];
    let s = norm(v);
    if s < 1e-12 {
        // θ ≈ 2s/w, axis·θ ≈ 2v/w
        return AxisAngle::from_array(scale(v, 2.0 / q.w));
    }
    let theta = 2.0 * s.atan2(q.w);
    let mut axis = scale(v, 1.0 / s);
    if q.w.abs() < 1e-15 {
        axis = pi_axis_convention(axis);
    }
    AxisAngle::from_array(scale(axis, theta))
}

pub fn axis_angle_to_quat(a: &AxisAngle) -> Quaternion {
    let v = a.to_array();
    let theta = norm(v);
    let half_sinc = if theta < 1e-4 {
        0.5 - theta * theta / 48.0
    } else {
        (0.5 * theta).sin() / theta
    };
    let q = Quaternion {
        w: (0.5 * theta).cos(),
        x: v[0] * half_sinc,
        y: v[1] * half_sinc,
        z: v[2] * half_sinc,
    };
    q.scaled(1.0 / q.norm())
}

pub fn quat_to_euler(q: Quaternion) -> Result<EulerExtraction> {
    Ok(matrix_to_euler(&quat_to_matrix(q)?))
}

pub fn euler_to_quat(e: &EulerAngles) -> Quaternion {
    matrix_to_quat(&euler_to_matrix(e))
}

/// Nearest rotation in Frobenius norm (polar projection via SVD).
pub fn project_to_rotation(m: &Mat3) -> Result<RotationMatrix> {
    if !m.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::InvalidRotation("non-finite matrix".into()));
    }
    let mat = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let svd = mat.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numeric("SVD failed".into())),
    };
    if svd.singular_values.max() < 1e-12 {
        return Err(Error::InvalidRotation("zero matrix".into()));
    }
    let d = (u * vt).determinant().signum();
    let dm = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, d));
    let r = u * dm * vt;
    Ok(RotationMatrix {
        m: [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ],
    })
}

/// Flips signs so consecutive quaternions lie in the same hemisphere.
/// The first element is kept as is.
pub fn enforce_quat_continuity(seq: &[Quaternion]) -> Vec<Quaternion> {
    let mut out = Vec::with_capacity(seq.len());
    let mut prev: Option<Quaternion> = None;
    for &q in seq {
        let q = match prev {
            Some(p) if p.dot(q) < 0.0 => q.neg(),
            _ => q,
        };
        out.push(q);
        prev = Some(q);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    const QUARTER_Z: Mat3 = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];

    fn close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
        RotationMatrix { m: *a }.max_abs_diff(&RotationMatrix { m: *b }) < tol
    }

    #[test]
    fn quat_identity_and_quarter_turn() {
        let r = quat_to_matrix(Quaternion::IDENTITY).unwrap();
        assert!(close(&r.m, &IDENTITY, 1e-15));
        let q = Quaternion::new(FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2).unwrap();
        assert!(close(&quat_to_matrix(q).unwrap().m, &QUARTER_Z, 1e-15));
        assert!(close(
            &quat_to_matrix(q.neg()).unwrap().m,
            &QUARTER_Z,
            1e-15
        ));
    }

    #[test]
    fn non_unit_quaternion_rejected() {
        let q = Quaternion {
            w: 1.1,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        };
        assert!(matches!(quat_to_matrix(q), Err(Error::InvalidRotation(_))));
        assert!(Quaternion::new(0.5, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn sixd_identity_and_scale() {
        assert_eq!(
            matrix_to_sixd(&RotationMatrix::IDENTITY).0,
            [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
        let r = sixd_to_matrix(&SixD([2.0, 0.0, 0.0, 0.0, 3.0, 0.0])).unwrap();
        assert!(close(&r.m, &IDENTITY, 1e-15));
    }

    #[test]
    fn sixd_degenerate() {
        assert!(matches!(
            sixd_to_matrix(&SixD([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])),
            Err(Error::DegenerateSixD(_))
        ));
        assert!(matches!(
            sixd_to_matrix(&SixD([1.0, 2.0, 3.0, 2.0, 4.0, 6.0])),
            Err(Error::DegenerateSixD(_))
        ));
    }

    #[test]
    fn euler_identity_and_gimbal() {
        let e = matrix_to_euler(&RotationMatrix::IDENTITY);
        assert_eq!(e.angles.to_array(), [0.0, 0.0, 0.0]);
        assert!(!e.gimbal_lock);

        let r = euler_to_matrix(&EulerAngles::new(0.3, PI / 2.0, -0.2));
        let e = matrix_to_euler(&r);
        assert!(e.gimbal_lock);
        assert_eq!(e.angles.ex, 0.0);
        // yaw absorbs roll + yaw
        let back = euler_to_matrix(&e.angles);
        assert!(back.max_abs_diff(&r) < 1e-12);
    }

    #[test]
    fn euler_range() {
        let e = EulerAngles::new(-PI, 3.0 * PI, 7.0);
        for c in e.to_array() {
            assert!(c > -PI && c <= PI);
        }
        assert_eq!(e.ex, PI);
    }

    #[test]
    fn axis_angle_closed_forms() {
        let r = axis_angle_to_matrix(&AxisAngle::new(0.0, 0.0, 0.0));
        assert!(close(&r.m, &IDENTITY, 0.0 + 1e-300));
        let r = axis_angle_to_matrix(&AxisAngle::new(0.0, 0.0, PI / 2.0));
        assert!(close(&r.m, &QUARTER_Z, 1e-15));
    }

    #[test]
    fn axis_angle_half_turn_is_deterministic() {
        for axis in [[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [-0.6, 0.0, -0.8]] {
            let pos = axis_angle_to_matrix(&AxisAngle::from_array(scale(axis, PI)));
            let neg = axis_angle_to_matrix(&AxisAngle::from_array(scale(axis, -PI)));
            let a = matrix_to_axis_angle(&pos).to_array();
            let b = matrix_to_axis_angle(&neg).to_array();
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-7, "{a:?} vs {b:?}");
            }
            assert!((norm(a) - PI).abs() < 1e-7);
            let big = a.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn canonicalize_wraps_into_range() {
        let a = AxisAngle::new(0.0, 0.0, 1.5 * PI).canonicalize();
        assert!((a.rz + 0.5 * PI).abs() < 1e-12);
        let a = AxisAngle::new(0.0, -PI, 0.0).canonicalize();
        assert!((a.ry - PI).abs() < 1e-15);
        let r1 = axis_angle_to_matrix(&AxisAngle::new(0.3, 2.0, -4.0));
        let r2 = axis_angle_to_matrix(&AxisAngle::new(0.3, 2.0, -4.0).canonicalize());
        assert!(r1.max_abs_diff(&r2) < 1e-12);
    }

    #[test]
    fn continuity_basic() {
        let q = Quaternion::new(0.5, 0.5, 0.5, 0.5).unwrap();
        let out = enforce_quat_continuity(&[q, q.neg()]);
        assert_eq!(out, vec![q, q]);
        let seq = vec![q, q, Quaternion::IDENTITY];
        assert_eq!(enforce_quat_continuity(&seq), seq);
        assert!(enforce_quat_continuity(&[]).is_empty());
    }

    #[test]
    fn projection_of_rotation_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r = quat_to_matrix(Quaternion::random(&mut rng)).unwrap();
            let p = project_to_rotation(&r.m).unwrap();
            assert!(p.max_abs_diff(&r) < 1e-12);
            let mut scaled = r.m;
            for row in scaled.iter_mut() {
                for v in row.iter_mut() {
                    *v *= 2.5;
                }
            }
            assert!(project_to_rotation(&scaled).unwrap().max_abs_diff(&r) < 1e-12);
        }
    }
}
