//! Optimization loop: per-batch loss and gradients, Adam, checkpoints and
//! deterministic resumable training.

mod checkpoint;
mod config;
mod gradients;
mod optimizer;
mod trainer;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{short_hash, Method, Preset, TrainConfig};
pub use gradients::{batch_is_usable, compute_gradients, StepOutput};
pub use optimizer::{clip_global_norm, Adam, AdamState};
pub use trainer::{resume_with, shuffle_seed, step_seed, train, train_with, EpochRecord, TrainOptions};
