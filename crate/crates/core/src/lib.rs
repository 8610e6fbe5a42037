//! Motion diffusion toolkit.
//!
//! Six motion representations, a v-parameterized DDPM with a small
//! transformer denoiser trained by hand-written reverse-mode
//! differentiation, geometric losses through forward kinematics, and the
//! generative-model metric suite (FID, KID, precision/recall, diversity,
//! smoothness).

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clip;
pub mod dataio;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod postprocess;
pub mod rotations;
pub mod representation;
pub mod skeleton;

pub use clip::MotionClip;
pub use error::{Error, Result};
pub use skeleton::{Pose, Skeleton};
