//! View/mask/negative sampling and the contrastive, masked-latent and hybrid
//! losses. Every loss returns its value together with gradients with respect
//! to its inputs; the training module chains them through the encoder.

mod cmlm;
mod coles;
mod cosine;
mod sampling;

pub use cmlm::{cmlm_loss, CmlmOutput, MaskedBatch};
pub use coles::{coles_loss, distance_matrix, mine_pairs, ColesOutput, PairSet};
pub use cosine::{cosine_distance, cosine_similarity, cosine_similarity_grad, NORM_EPS};
pub use sampling::{sample_mask, sample_negatives, sample_views, MaskPlan, View, ViewLenRange};

use crate::scalar::Scalar;
use crate::{Error, Result};

/// `coles + lambda * cmlm`.
pub fn hybrid_loss<T: Scalar>(coles: T, cmlm: T, lambda: T) -> Result<T> {
    if lambda.is_nan() || lambda < T::zero() {
        return Err(Error::config(format!("lambda {lambda} must be non-negative")));
    }
    if !coles.is_finite() {
        return Err(Error::NonFinite("contrastive loss".into()));
    }
    if !cmlm.is_finite() {
        return Err(Error::NonFinite("masked loss".into()));
    }
    Ok(coles + lambda * cmlm)
}
