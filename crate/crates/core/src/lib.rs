//! Self-supervised representation learning for transaction event sequences.
//!
//! The crate trains a single-layer LSTM encoder over `(mcc, amount)` events
//! with one of four objectives:
//!
//! * `coles`: contrastive loss over sampled subsequence views with a margin
//!   hinge on hard-mined negatives,
//! * `cmlm`: masked-event prediction in latent space scored with an
//!   InfoNCE softmax over cosine similarities,
//! * `coles_masked`: the contrastive loss computed on masked views,
//! * `hybrid`: `coles + lambda * cmlm`.
//!
//! Frozen encoders are scored on a global task (sequence classification from
//! the last hidden state) and a local task (next-MCC prediction from every
//! hidden state) with weighted one-vs-rest ROC-AUC.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod data;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod gradcheck;
pub mod linalg;
pub mod objectives;
pub mod rng;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub use data::{Dataset, Event, EventSequence, PaddedBatch, Vocabulary};
pub use encoder::{Dims, ModelParams};
pub use training::{Checkpoint, Method, TrainConfig};

/// Model parameters in double precision (the training default).
pub type ModelParamsF64 = ModelParams<f64>;
/// Model parameters in single precision.
pub type ModelParamsF32 = ModelParams<f32>;
/// Dense row-major matrix of `f64`.
pub type MatrixF64 = Matrix<f64>;
/// Dense row-major matrix of `f32`.
pub type MatrixF32 = Matrix<f32>;
