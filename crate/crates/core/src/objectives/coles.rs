//! Contrastive loss over subsequence views.
//!
//! Positives are every unordered pair of views with the same origin, each
//! contributing `d²`. Negatives are mined: each view nominates its `n_hard`
//! nearest views of other origins (ties broken by index), and the union of
//! nominations is taken as a set of unordered pairs, each contributing
//! `max(0, rho - d)²`. `d` is cosine distance. The loss is the sum divided by
//! the number of contributing pairs: all positive pairs plus the negatives
//! whose hinge is active.

use std::collections::BTreeSet;

use crate::linalg::{axpy, Matrix};
use crate::objectives::cosine::{cosine_distance, cosine_similarity_grad};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Unordered index pairs `(a, b)` with `a < b`, sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairSet {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct ColesOutput<T> {
    /// Mean over contributing pairs.
    pub loss: T,
    /// Unaveraged sum of pair terms.
    pub sum: T,
    pub contributing: usize,
    pub pairs: PairSet,
    /// `∂loss/∂z` per view.
    pub grad: Matrix<T>,
}

pub fn distance_matrix<T: Scalar>(z: &Matrix<T>) -> Matrix<T> {
    let m = z.rows();
    let mut d = Matrix::zeros(m, m);
    for a in 0..m {
        for b in a + 1..m {
            let v = cosine_distance(z.row(a), z.row(b));
            d.set(a, b, v);
            d.set(b, a, v);
        }
    }
    d
}

/// Builds the positive set and the mined negative set. `n_hard = usize::MAX`
/// keeps every cross-origin pair.
pub fn mine_pairs<T: Scalar>(dist: &Matrix<T>, origins: &[usize], n_hard: usize) -> PairSet {
    let m = origins.len();
    let mut positives = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if origins[a] == origins[b] {
                positives.push((a, b));
            }
        }
    }
    let mut negatives = BTreeSet::new();
    let mut candidates: Vec<usize> = Vec::with_capacity(m);
    for a in 0..m {
        candidates.clear();
        candidates.extend((0..m).filter(|&b| origins[b] != origins[a]));
        candidates.sort_by(|&x, &y| dist.get(a, x).partial_cmp(&dist.get(a, y)).unwrap().then(x.cmp(&y)));
        for &b in candidates.iter().take(n_hard) {
            negatives.insert((a.min(b), a.max(b)));
        }
    }
    PairSet {
        positives,
        negatives: negatives.into_iter().collect(),
    }
}

pub fn coles_loss<T: Scalar>(z: &Matrix<T>, origins: &[usize], rho: T, n_hard: usize) -> Result<ColesOutput<T>> {
    if z.rows() != origins.len() {
        return Err(Error::Shape(format!("{} embeddings, {} origins", z.rows(), origins.len())));
    }
    if rho.is_nan() || rho <= T::zero() {
        return Err(Error::config("margin rho must be positive"));
    }
    if n_hard == 0 {
        return Err(Error::config("n_hard must be at least 1"));
    }
    let distinct: BTreeSet<usize> = origins.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::invalid("contrastive loss needs views from at least two sequences"));
    }

    let dist = distance_matrix(z);
    let pairs = mine_pairs(&dist, origins, n_hard);
    let two = T::of(2.0);
    let mut sum = T::zero();
    let mut contributing = pairs.positives.len();
    // (a, b, ∂term/∂s)
    let mut pair_grads: Vec<(usize, usize, T)> = Vec::with_capacity(pairs.positives.len() + pairs.negatives.len());
    for &(a, b) in &pairs.positives {
        let d = dist.get(a, b);
        sum += d * d;
        // d = 1 - s  ⇒  ∂d²/∂s = -2d
        pair_grads.push((a, b, -two * d));
    }
    for &(a, b) in &pairs.negatives {
        let gap = rho - dist.get(a, b);
        if gap > T::zero() {
            sum += gap * gap;
            contributing += 1;
            // ∂(rho - d)²/∂s = 2 (rho - d)
            pair_grads.push((a, b, two * gap));
        }
    }

    let mut grad = Matrix::zeros(z.rows(), z.cols());
    if contributing == 0 {
        return Ok(ColesOutput {
            loss: T::zero(),
            sum,
            contributing,
            pairs,
            grad,
        });
    }
    let scale = T::one() / T::from_usize(contributing).unwrap();
    for (a, b, ds) in pair_grads {
        let (_, du, dv) = cosine_similarity_grad(z.row(a), z.row(b));
        axpy(ds * scale, &du, grad.row_mut(a));
        axpy(ds * scale, &dv, grad.row_mut(b));
    }
    Ok(ColesOutput {
        loss: sum * scale,
        sum,
        contributing,
        pairs,
        grad,
    })
}
