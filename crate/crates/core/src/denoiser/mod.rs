//! Transformer denoiser predicting `v` from a noisy clip and its timestep,
//! with the reverse-mode machinery and optimizer used to train it.

pub mod adam;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use model::{sinusoidal_embedding, Denoiser, DenoiserConfig, ParamSpec};
pub use tape::{Activation, NodeId, Tape};
pub use tensor::{Mat, Real};
pub use train::{train_step, StepRecord, TrainConfig, Trainer, TrainingSet};
