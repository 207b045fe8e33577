//! Masked-latent InfoNCE loss.
//!
//! For masked position `i` with true embedding `r_i`, prediction `r̂_i` and
//! negative index set `J_i`,
//!
//! ```text
//! term_i = -log( e^{sim(r_i, r̂_i)} / (e^{sim(r_i, r̂_i)} + Σ_{j∈J_i} e^{sim(r_i, r̂_j)}) )
//! ```
//!
//! i.e. cross-entropy of a `1-of-(|J_i|+1)` softmax over cosine similarities
//! with the positive in slot 0. Negatives compare the target against other
//! positions' predictions. The loss is the mean over masked positions.

use crate::linalg::{axpy, log_sum_exp, Matrix};
use crate::objectives::cosine::cosine_similarity_grad;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MaskedBatch<T> {
    /// True event embeddings at masked positions, pooled over the batch.
    pub targets: Matrix<T>,
    /// Predicted embeddings, row-aligned with `targets`.
    pub predictions: Matrix<T>,
    /// Indices into the pool, excluding the row's own index.
    pub negatives: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct CmlmOutput<T> {
    pub loss: T,
    pub per_term: Vec<T>,
    pub grad_targets: Matrix<T>,
    pub grad_predictions: Matrix<T>,
}

pub fn cmlm_loss<T: Scalar>(mb: &MaskedBatch<T>) -> Result<CmlmOutput<T>> {
    let n = mb.targets.rows();
    if n == 0 {
        return Err(Error::invalid("masked loss needs at least one masked position"));
    }
    if mb.predictions.shape() != mb.targets.shape() || mb.negatives.len() != n {
        return Err(Error::Shape(format!(
            "targets {:?}, predictions {:?}, {} negative sets",
            mb.targets.shape(),
            mb.predictions.shape(),
            mb.negatives.len()
        )));
    }
    let scale = T::one() / T::from_usize(n).unwrap();
    let mut grad_targets = Matrix::zeros(n, mb.targets.cols());
    let mut grad_predictions = Matrix::zeros(n, mb.targets.cols());
    let mut per_term = Vec::with_capacity(n);
    let mut logits = Vec::new();
    let mut parts: Vec<(usize, Vec<T>, Vec<T>)> = Vec::new();

    for (i, negs) in mb.negatives.iter().enumerate() {
        if negs.is_empty() {
            return Err(Error::invalid(format!("masked position {i} has no negatives")));
        }
        if let Some(&j) = negs.iter().find(|&&j| j == i || j >= n) {
            return Err(Error::invalid(format!("negative index {j} invalid for position {i}")));
        }
        let r = mb.targets.row(i);
        logits.clear();
        parts.clear();
        for &j in std::iter::once(&i).chain(negs) {
            let (s, dr, dp) = cosine_similarity_grad(r, mb.predictions.row(j));
            logits.push(s);
            parts.push((j, dr, dp));
        }
        let lse = log_sum_exp(&logits);
        per_term.push(lse - logits[0]);
        for (slot, (j, dr, dp)) in parts.iter().enumerate() {
            let p = (logits[slot] - lse).exp();
            let dz = if slot == 0 { p - T::one() } else { p } * scale;
            axpy(dz, dr, grad_targets.row_mut(i));
            axpy(dz, dp, grad_predictions.row_mut(*j));
        }
    }
    let loss = per_term.iter().copied().sum::<T>() * scale;
    Ok(CmlmOutput {
        loss,
        per_term,
        grad_targets,
        grad_predictions,
    })
}
