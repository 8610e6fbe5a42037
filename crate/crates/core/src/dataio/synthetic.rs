//! Seeded synthetic motion for desk-scale training.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clip::MotionClip;
use crate::error::{Error, Result};
use crate::rotations::{axis_angle_to_quat, AxisAngle, Quaternion};
use crate::skeleton::Skeleton;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Stepping chain: the root advances in strides along `x`, and every
    /// stride ends in a stance phase where the chain hangs straight with its
    /// tip on the ground and at rest.
    SinusoidalGait,
    /// Root traces a horizontal figure-eight while the chain sways.
    FigureEight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMotionSpec {
    pub generator: GeneratorKind,
    pub joints: usize,
    pub frames: usize,
    pub fps: f64,
    pub clips: usize,
    /// Per-clip amplitude drawn uniformly from `[lo, hi]`.
    pub amplitude: [f64; 2],
    /// Per-clip cycle frequency in Hz drawn uniformly from `[lo, hi]`.
    pub frequency: [f64; 2],
    pub bone_length: f64,
    pub seed: u64,
}

impl Default for SyntheticMotionSpec {
    fn default() -> Self {
        SyntheticMotionSpec {
            generator: GeneratorKind::SinusoidalGait,
            joints: 4,
            frames: 32,
            fps: 30.0,
            clips: 512,
            amplitude: [0.6, 1.0],
            frequency: [0.75, 1.25],
            bone_length: 0.25,
            seed: 0,
        }
    }
}

impl SyntheticMotionSpec {
    /// The chain skeleton the clips animate.
    pub fn skeleton(&self) -> Result<Skeleton> {
        Skeleton::chain(self.joints, self.bone_length)
    }

    pub fn validate(&self) -> Result<()> {
        let ok_range = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] >= 0.0 && r[0] <= r[1];
        if self.joints == 0 || self.frames == 0 || self.clips == 0 {
            return Err(Error::invalid("joints, frames and clips must be at least 1"));
        }
        if !(self.fps > 0.0) || !(self.bone_length > 0.0) {
            return Err(Error::invalid("fps and bone_length must be positive"));
        }
        if !ok_range(self.amplitude) || !ok_range(self.frequency) {
            return Err(Error::invalid("amplitude and frequency ranges must be ordered and non-negative"));
        }
        Ok(())
    }
}

fn about(axis: [f64; 3], angle: f64) -> Quaternion {
    axis_angle_to_quat(&AxisAngle {
        rx: axis[0] * angle,
        ry: axis[1] * angle,
        rz: axis[2] * angle,
    })
}

fn draw(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

pub fn generate_synthetic(spec: &SyntheticMotionSpec) -> Result<Vec<MotionClip>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (j, l) = (spec.joints, spec.bone_length);
    let height = (j - 1) as f64 * l;
    (0..spec.clips)
        .map(|_| {
            let a = draw(&mut rng, spec.amplitude);
            let f = draw(&mut rng, spec.frequency);
            let phase = rng.random_range(0.0..TAU);
            let w = TAU * f / spec.fps;
            let mut roots = Vec::with_capacity(spec.frames);
            let mut rots = Vec::with_capacity(spec.frames);
            match spec.generator {
                GeneratorKind::SinusoidalGait => {
                    let stride = |s: f64| a * l * (s - s.sin()) / PI;
                    let x0 = stride(phase);
                    for n in 0..spec.frames {
                        let s = w * n as f64 + phase;
                        roots.push([stride(s) - x0, height, 0.0]);
                        let bend = a * 0.5 * (1.0 - s.cos());
                        rots.push(
                            (0..j)
                                .map(|k| match k {
                                    0 => Quaternion::IDENTITY,
                                    k => about([0.0, 0.0, 1.0], if k % 2 == 1 { bend } else { -0.6 * bend }),
                                })
                                .collect(),
                        );
                    }
                }
                GeneratorKind::FigureEight => {
                    let r = j as f64 * l;
                    for n in 0..spec.frames {
                        let s = w * n as f64 + phase;
                        roots.push([a * r * s.sin(), height, 0.5 * a * r * (2.0 * s).sin()]);
                        rots.push(
                            (0..j)
                                .map(|k| match k {
                                    0 => about([0.0, 1.0, 0.0], 0.3 * a * s.sin()),
                                    k => about([1.0, 0.0, 0.0], 0.2 * a * (2.0 * s + k as f64).sin()),
                                })
                                .collect(),
                        );
                    }
                }
            }
            MotionClip::new(spec.fps, roots, rots)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_static_rest() {
        let spec = SyntheticMotionSpec { amplitude: [0.0, 0.0], clips: 3, ..Default::default() };
        for c in generate_synthetic(&spec).unwrap() {
            assert!(c.rotations.iter().flatten().all(|q| *q == Quaternion::IDENTITY));
            assert!(c.root_positions.iter().all(|p| *p == c.root_positions[0]));
        }
    }

    #[test]
    fn seeded_generation_repeats() {
        for generator in [GeneratorKind::SinusoidalGait, GeneratorKind::FigureEight] {
            let spec = SyntheticMotionSpec { generator, clips: 4, ..Default::default() };
            assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        }
    }
}
