//! Training objective: SNR-weighted v loss plus geometric terms computed
//! on the predicted clean clip through decode and forward kinematics.
//!
//! Geometric terms reduce as a per-frame squared L2 norm averaged over
//! frames (over frame pairs for the velocity-like terms).

use serde::{Deserialize, Serialize};

use crate::clip::MotionClip;
use crate::diffusion::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::representation::{decode_frame, decode_frame_vjp, FeatureMatrix, Normalizer};
use crate::rotations::Vec3;
use crate::skeleton::Skeleton;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda_pos: f64,
    pub lambda_vel: f64,
    pub lambda_fc: f64,
    pub geometric_enabled: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_pos: 1.0,
            lambda_vel: 1.0,
            lambda_fc: 1.0,
            geometric_enabled: true,
        }
    }
}

impl LossConfig {
    /// The v loss alone.
    pub fn v_only() -> Self {
        LossConfig {
            geometric_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_pos", self.lambda_pos), ("lambda_vel", self.lambda_vel), ("lambda_fc", self.lambda_fc)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    fn geometric(&self) -> bool {
        self.geometric_enabled && (self.lambda_pos > 0.0 || self.lambda_vel > 0.0 || self.lambda_fc > 0.0)
    }
}

/// Thresholds for contact extraction: a foot is planted when its speed
/// (units per frame) and its height are both below these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactThresholds {
    pub speed: f64,
    pub height: f64,
}

impl Default for ContactThresholds {
    fn default() -> Self {
        ContactThresholds { speed: 0.01, height: 0.05 }
    }
}

/// Per frame pair `(i, i+1)`, one flag for each of the four foot joints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootContactLabels {
    pub flags: Vec<[bool; 4]>,
}

impl FootContactLabels {
    pub fn all(value: bool, frames: usize) -> Self {
        FootContactLabels {
            flags: vec![[value; 4]; frames.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Labels from joint positions: `speed_i = ‖p_{i+1} − p_i‖`, height is the
/// `y` coordinate at frame `i`.
pub fn foot_contacts_from_positions(
    positions: &[Vec<Vec3>],
    feet: [usize; 4],
    thresholds: ContactThresholds,
) -> FootContactLabels {
    let flags = positions
        .windows(2)
        .map(|w| {
            let mut f = [false; 4];
            for (k, &j) in feet.iter().enumerate() {
                let (a, b) = (w[0][j], w[1][j]);
                let speed = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
                f[k] = speed < thresholds.speed && a[1] < thresholds.height;
            }
            f
        })
        .collect();
    FootContactLabels { flags }
}

pub fn extract_foot_contacts(
    clip: &MotionClip,
    skel: &Skeleton,
    thresholds: ContactThresholds,
) -> Result<FootContactLabels> {
    let feet = skel
        .foot_joints()
        .ok_or_else(|| Error::invalid(format!("skeleton '{}' has no foot joints", skel.name)))?;
    Ok(foot_contacts_from_positions(&clip.joint_positions(skel)?, feet, thresholds))
}

fn same_len(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("{what}: lengths {} and {}", a.len(), b.len())));
    }
    Ok(())
}

fn same_layout(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<()> {
    if (a.kind, a.joints, a.frames) != (b.kind, b.joints, b.frames) {
        return Err(Error::shape(format!(
            "feature matrices differ: {} J={} N={} vs {} J={} N={}",
            a.kind, a.joints, a.frames, b.kind, b.joints, b.frames
        )));
    }
    Ok(())
}

/// `ᾱ_t · mean((v − v̂)²)` and its gradient with respect to `v̂`.
pub fn v_loss_grad(schedule: &DiffusionSchedule, t: usize, v_true: &[f64], v_pred: &[f64]) -> Result<(f64, Vec<f64>)> {
    schedule.check_timestep(t)?;
    same_len(v_true, v_pred, "v_loss")?;
    if v_true.is_empty() {
        return Err(Error::shape("v_loss of an empty sample"));
    }
    let w = schedule.alpha_bar(t);
    let n = v_true.len() as f64;
    let mut loss = 0.0;
    let grad = v_true
        .iter()
        .zip(v_pred)
        .map(|(a, b)| {
            let r = b - a;
            loss += r * r;
            2.0 * w * r / n
        })
        .collect();
    Ok((w * loss / n, grad))
}

pub fn v_loss(schedule: &DiffusionSchedule, t: usize, v_true: &[f64], v_pred: &[f64]) -> Result<f64> {
    v_loss_grad(schedule, t, v_true, v_pred).map(|r| r.0)
}

/// `(1/N)·Σ_n Σ_j ‖p̂_{n,j} − p_{n,j}‖²` on decoded positions, with the
/// gradient with respect to `x0_hat`'s features.
pub fn position_loss_grad(x0: &FeatureMatrix, x0_hat: &FeatureMatrix, skel: &Skeleton) -> Result<(f64, Vec<f64>)> {
    same_layout(x0, x0_hat)?;
    let n = x0.frames as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; x0_hat.data.len()];
    for f in 0..x0.frames {
        let target = decode_frame(x0.kind, skel, x0.frame(f), f)?;
        let pred = decode_frame(x0_hat.kind, skel, x0_hat.frame(f), f)?;
        let gpos: Vec<Vec3> = pred
            .positions
            .iter()
            .zip(&target.positions)
            .map(|(p, q)| {
                let r = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
                loss += r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
                [2.0 * r[0] / n, 2.0 * r[1] / n, 2.0 * r[2] / n]
            })
            .collect();
        let g = decode_frame_vjp(x0_hat.kind, skel, x0_hat.frame(f), &pred, &gpos)?;
        let d = x0_hat.dim();
        grad[f * d..(f + 1) * d].copy_from_slice(&g);
    }
    Ok((loss / n, grad))
}

pub fn position_loss(x0: &FeatureMatrix, x0_hat: &FeatureMatrix, skel: &Skeleton) -> Result<f64> {
    position_loss_grad(x0, x0_hat, skel).map(|r| r.0)
}

/// `(1/(N−1))·Σ_i ‖Δx0_i − Δx̂0_i‖²` over frame differences of the raw
/// features, with the gradient with respect to `x0_hat`.
pub fn velocity_loss_grad(x0: &FeatureMatrix, x0_hat: &FeatureMatrix) -> Result<(f64, Vec<f64>)> {
    same_layout(x0, x0_hat)?;
    if x0.frames < 2 {
        return Err(Error::shape("velocity loss needs at least 2 frames"));
    }
    let (d, pairs) = (x0.dim(), (x0.frames - 1) as f64);
    let mut loss = 0.0;
    let mut grad = vec![0.0; x0_hat.data.len()];
    for i in 0..x0.frames - 1 {
        for k in 0..d {
            let r = (x0_hat.get(k, i + 1) - x0_hat.get(k, i)) - (x0.get(k, i + 1) - x0.get(k, i));
            loss += r * r;
            let g = 2.0 * r / pairs;
            grad[(i + 1) * d + k] += g;
            grad[i * d + k] -= g;
        }
    }
    Ok((loss / pairs, grad))
}

pub fn velocity_loss(x0: &FeatureMatrix, x0_hat: &FeatureMatrix) -> Result<f64> {
    velocity_loss_grad(x0, x0_hat).map(|r| r.0)
}

/// `(1/(N−1))·Σ_i Σ_k f_{i,k}·‖p̂_{i+1,k} − p̂_{i,k}‖²` over the four foot
/// joints `k`. Zero for skeletons without foot joints.
pub fn foot_contact_loss_grad(
    x0_hat: &FeatureMatrix,
    labels: &FootContactLabels,
    skel: &Skeleton,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; x0_hat.data.len()];
    let Some(feet) = skel.foot_joints() else {
        return Ok((0.0, grad));
    };
    if x0_hat.frames < 2 {
        return Err(Error::shape("foot contact loss needs at least 2 frames"));
    }
    if labels.len() != x0_hat.frames - 1 {
        return Err(Error::shape(format!(
            "{} label rows for {} frames (expected N-1)",
            labels.len(),
            x0_hat.frames
        )));
    }
    let pairs = (x0_hat.frames - 1) as f64;
    let decoded = (0..x0_hat.frames)
        .map(|f| decode_frame(x0_hat.kind, skel, x0_hat.frame(f), f))
        .collect::<Result<Vec<_>>>()?;
    let mut gpos = vec![vec![[0.0; 3]; skel.joint_count()]; x0_hat.frames];
    let mut loss = 0.0;
    for (i, flags) in labels.flags.iter().enumerate() {
        for (k, &j) in feet.iter().enumerate() {
            if !flags[k] {
                continue;
            }
            let (a, b) = (decoded[i].positions[j], decoded[i + 1].positions[j]);
            for c in 0..3 {
                let r = b[c] - a[c];
                loss += r * r;
                gpos[i + 1][j][c] += 2.0 * r / pairs;
                gpos[i][j][c] -= 2.0 * r / pairs;
            }
        }
    }
    let d = x0_hat.dim();
    for (f, dec) in decoded.iter().enumerate() {
        let g = decode_frame_vjp(x0_hat.kind, skel, x0_hat.frame(f), dec, &gpos[f])?;
        grad[f * d..(f + 1) * d].copy_from_slice(&g);
    }
    Ok((loss / pairs, grad))
}

pub fn foot_contact_loss(x0_hat: &FeatureMatrix, labels: &FootContactLabels, skel: &Skeleton) -> Result<f64> {
    foot_contact_loss_grad(x0_hat, labels, skel).map(|r| r.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub v: f64,
    pub position: f64,
    pub velocity: f64,
    pub foot_contact: f64,
}

impl LossBreakdown {
    /// Componentwise mean.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut m = LossBreakdown::default();
        for b in items {
            m.total += b.total / n;
            m.v += b.v / n;
            m.position += b.position / n;
            m.velocity += b.velocity / n;
            m.foot_contact += b.foot_contact / n;
        }
        m
    }
}

/// Everything the objective needs for one training sample. `x_t` and the
/// v quantities live in normalized feature space; `x0` is the raw clean
/// clip the geometric terms compare against.
#[derive(Debug, Clone, Copy)]
pub struct SampleLoss<'a> {
    pub t: usize,
    pub x_t: &'a [f64],
    pub v_true: &'a [f64],
    pub v_pred: &'a [f64],
    pub x0: &'a FeatureMatrix,
    pub labels: Option<&'a FootContactLabels>,
}

/// `L_v + λ_pos·L_pos + λ_vel·L_vel + λ_fc·L_fc` with the gradient with
/// respect to `v̂`. The predicted clean clip is
/// `x̂0 = denorm(√ᾱ_t·x_t − √(1−ᾱ_t)·v̂)`.
pub fn total_loss_grad(
    cfg: &LossConfig,
    schedule: &DiffusionSchedule,
    normalizer: &Normalizer,
    skel: &Skeleton,
    s: &SampleLoss<'_>,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let (lv, mut grad) = v_loss_grad(schedule, s.t, s.v_true, s.v_pred)?;
    let mut out = LossBreakdown {
        v: lv,
        ..Default::default()
    };
    if cfg.geometric() {
        let d = s.x0.dim();
        if normalizer.dim() != d || s.x_t.len() != s.x0.data.len() || s.v_pred.len() != s.x0.data.len() {
            return Err(Error::shape("loss inputs disagree on feature layout"));
        }
        let ab = schedule.alpha_bar(s.t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        let mut hat = s.x0.clone();
        for (i, v) in hat.data.iter_mut().enumerate() {
            let k = i % d;
            *v = normalizer.mean[k] + normalizer.std[k] * (a * s.x_t[i] - b * s.v_pred[i]);
        }
        let mut g_hat = vec![0.0; hat.data.len()];
        let mut add = |g: &[f64], w: f64| {
            for (acc, v) in g_hat.iter_mut().zip(g) {
                *acc += w * v;
            }
        };
        if cfg.lambda_pos > 0.0 {
            let (l, g) = position_loss_grad(s.x0, &hat, skel)?;
            out.position = l;
            add(&g, cfg.lambda_pos);
        }
        if cfg.lambda_vel > 0.0 && hat.frames >= 2 {
            let (l, g) = velocity_loss_grad(s.x0, &hat)?;
            out.velocity = l;
            add(&g, cfg.lambda_vel);
        }
        if cfg.lambda_fc > 0.0 {
            if let Some(labels) = s.labels {
                let (l, g) = foot_contact_loss_grad(&hat, labels, skel)?;
                out.foot_contact = l;
                add(&g, cfg.lambda_fc);
            }
        }
        for (i, gv) in grad.iter_mut().enumerate() {
            *gv -= b * normalizer.std[i % d] * g_hat[i];
        }
    }
    out.total = out.v + cfg.lambda_pos * out.position + cfg.lambda_vel * out.velocity + cfg.lambda_fc * out.foot_contact;
    if !out.total.is_finite() {
        return Err(Error::NonFinite(format!("loss at t={}: {:?}", s.t, out)));
    }
    Ok((out, grad))
}

pub fn total_loss(
    cfg: &LossConfig,
    schedule: &DiffusionSchedule,
    normalizer: &Normalizer,
    skel: &Skeleton,
    s: &SampleLoss<'_>,
) -> Result<LossBreakdown> {
    total_loss_grad(cfg, schedule, normalizer, skel, s).map(|r| r.0)
}
