//! Event encoder (MCC embedding concatenated with the amount) followed by a
//! single-layer unidirectional LSTM. The hidden state at the last event is
//! the sequence embedding; hidden states at masked positions feed a linear
//! head that predicts the masked event's embedding.

mod lstm;
mod params;

pub use lstm::{lstm_backward, lstm_forward, lstm_forward_traced, HiddenStates, LstmTrace};
pub use params::{Dims, Gradients, ModelParams, TENSOR_NAMES};
pub(crate) use params::hex;

use crate::data::{EventSequence, PaddedBatch};
use crate::linalg::{axpy, Matrix};
use crate::objectives::MaskPlan;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Event embeddings of one sequence, `T × (k+1)`.
pub type EventEmbeddings<T> = Matrix<T>;

/// Embeds one sequence: row `t` is `[mcc_table[mcc_t] ; amount_t]`.
pub fn embed_sequence<T: Scalar>(params: &ModelParams<T>, mcc: &[usize], amount: &[f64]) -> Result<EventEmbeddings<T>> {
    debug_assert_eq!(mcc.len(), amount.len());
    let d = params.dims;
    let mut out = Matrix::zeros(mcc.len(), d.input());
    for (t, (&m, &a)) in mcc.iter().zip(amount).enumerate() {
        if m >= d.vocab {
            return Err(Error::invalid(format!("mcc index {m} >= vocab size {}", d.vocab)));
        }
        let row = out.row_mut(t);
        row[..d.k].copy_from_slice(params.mcc_table.row(m));
        row[d.k] = T::of(a);
    }
    Ok(out)
}

/// Embeds every row of a padded batch over its valid positions only.
pub fn embed_events<T: Scalar>(params: &ModelParams<T>, batch: &PaddedBatch) -> Result<Vec<EventEmbeddings<T>>> {
    (0..batch.len())
        .map(|b| embed_sequence(params, batch.mcc_row(b), batch.amount_row(b)))
        .collect()
}

/// Embeddings with some rows replaced by the mask vector, plus the original
/// rows at those positions (the masked-prediction targets).
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedEmbeddings<T> {
    pub input: EventEmbeddings<T>,
    /// One row per masked position, in `positions` order.
    pub targets: Matrix<T>,
    pub positions: Vec<usize>,
}

/// Masks one sequence. `positions` must be valid, sorted and distinct.
pub fn mask_sequence<T: Scalar>(
    embs: &EventEmbeddings<T>,
    positions: &[usize],
    params: &ModelParams<T>,
) -> Result<MaskedEmbeddings<T>> {
    let mut input = embs.clone();
    let mut targets = Matrix::zeros(positions.len(), embs.cols());
    for (i, &p) in positions.iter().enumerate() {
        if p >= embs.rows() {
            return Err(Error::invalid(format!(
                "mask position {p} outside sequence of length {}",
                embs.rows()
            )));
        }
        if i > 0 && positions[i - 1] >= p {
            return Err(Error::invalid("mask positions must be strictly increasing"));
        }
        targets.row_mut(i).copy_from_slice(embs.row(p));
        input.row_mut(p).copy_from_slice(&params.mask_vector);
    }
    Ok(MaskedEmbeddings {
        input,
        targets,
        positions: positions.to_vec(),
    })
}

/// Applies a batch mask plan to per-sequence embeddings.
pub fn apply_mask<T: Scalar>(
    embs: &[EventEmbeddings<T>],
    plan: &MaskPlan,
    params: &ModelParams<T>,
) -> Result<Vec<MaskedEmbeddings<T>>> {
    if plan.positions.len() != embs.len() {
        return Err(Error::Shape(format!(
            "mask plan covers {} sequences, batch has {}",
            plan.positions.len(),
            embs.len()
        )));
    }
    embs.iter()
        .zip(&plan.positions)
        .map(|(e, pos)| mask_sequence(e, pos, params))
        .collect()
}

/// `f(x)`: the last hidden state of the unmasked sequence.
pub fn sequence_embedding<T: Scalar>(params: &ModelParams<T>, seq: &EventSequence) -> Result<Vec<T>> {
    if seq.is_empty() {
        return Err(Error::invalid(format!("sequence {} is empty", seq.id)));
    }
    let mcc: Vec<usize> = seq.events.iter().map(|e| e.mcc).collect();
    let amount: Vec<f64> = seq.events.iter().map(|e| e.amount).collect();
    let x = embed_sequence(params, &mcc, &amount)?;
    let hs = lstm_forward(params, &x)?;
    Ok(hs.last().expect("non-empty").to_vec())
}

/// Predicted embedding `P h_i + p` for every masked position `i`, where
/// `hidden` was computed with the mask vector in place at those positions.
pub fn predict_masked<T: Scalar>(
    params: &ModelParams<T>,
    hidden: &HiddenStates<T>,
    positions: &[usize],
) -> Result<Matrix<T>> {
    if positions.is_empty() {
        return Err(Error::invalid("masked prediction needs at least one position"));
    }
    let mut out = Matrix::zeros(positions.len(), params.dims.input());
    for (i, &p) in positions.iter().enumerate() {
        if p >= hidden.len() {
            return Err(Error::invalid(format!("mask position {p} outside {} states", hidden.len())));
        }
        let row = out.row_mut(i);
        row.copy_from_slice(&params.proj_bias);
        params.proj.matvec_add(hidden.h.row(p), row);
    }
    Ok(out)
}

/// Backward of [`predict_masked`]: accumulates into `proj`/`proj_bias` and
/// adds `Pᵀ dr̂_i` into row `positions[i]` of `dh`.
pub fn predict_masked_backward<T: Scalar>(
    params: &ModelParams<T>,
    hidden: &HiddenStates<T>,
    positions: &[usize],
    d_pred: &Matrix<T>,
    dh: &mut Matrix<T>,
    grads: &mut Gradients<T>,
) {
    for (i, &p) in positions.iter().enumerate() {
        let g = d_pred.row(i);
        grads.proj.add_outer(g, hidden.h.row(p));
        axpy(T::one(), g, &mut grads.proj_bias);
        params.proj.matvec_t_add(g, dh.row_mut(p));
    }
}

/// Routes input-row gradients to their sources: masked rows to the mask
/// vector, other rows to the MCC table (the amount channel is data).
pub fn scatter_input_grads<T: Scalar>(dx: &Matrix<T>, mcc: &[usize], masked: &[usize], grads: &mut Gradients<T>) {
    let k = grads.dims.k;
    let mut next_masked = masked.iter().peekable();
    for (t, &m) in mcc.iter().enumerate() {
        let row = dx.row(t);
        if next_masked.peek() == Some(&&t) {
            next_masked.next();
            axpy(T::one(), row, &mut grads.mask_vector);
        } else {
            axpy(T::one(), &row[..k], grads.mcc_table.row_mut(m));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Event;

    fn params() -> ModelParams<f64> {
        ModelParams::init(Dims::new(2, 4, 3).unwrap(), 5)
    }

    fn seq(mcc: &[usize]) -> EventSequence {
        EventSequence {
            id: "x".into(),
            events: mcc
                .iter()
                .enumerate()
                .map(|(t, &m)| Event {
                    mcc: m,
                    amount: 0.1 * t as f64,
                    time: t as i64,
                })
                .collect(),
            label: None,
        }
    }

    #[test]
    fn embedding_is_concatenation() {
        let mut p = params();
        p.mcc_table.row_mut(1).copy_from_slice(&[0.3, -0.1]);
        let e = embed_sequence(&p, &[1], &[1.5]).unwrap();
        assert_eq!(e.row(0), &[0.3, -0.1, 1.5]);
        let e = embed_sequence(&p, &[2, 2], &[1.0, 2.0]).unwrap();
        assert_eq!(e.row(0)[..2], e.row(1)[..2]);
        assert_ne!(e.row(0)[2], e.row(1)[2]);
        p.mcc_table.fill(0.0);
        assert_eq!(embed_sequence(&p, &[3], &[0.7]).unwrap().row(0), &[0.0, 0.0, 0.7]);
    }

    #[test]
    fn out_of_vocab_rejected() {
        assert!(embed_sequence(&params(), &[4], &[0.0]).is_err());
    }

    #[test]
    fn masking_rules() {
        let p = params();
        let e = embed_sequence(&p, &[1, 2, 3], &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(mask_sequence(&e, &[], &p).unwrap().input, e);
        let all = mask_sequence(&e, &[0, 1, 2], &p).unwrap();
        assert!(all.input.iter_rows().all(|r| r == p.mask_vector.as_slice()));
        let one = mask_sequence(&e, &[1], &p).unwrap();
        assert_eq!(one.input.row(0), e.row(0));
        assert_eq!(one.input.row(2), e.row(2));
        assert_eq!(one.input.row(1), p.mask_vector.as_slice());
        assert_eq!(one.targets.row(0), e.row(1));
        assert!(mask_sequence(&e, &[3], &p).is_err());
    }

    #[test]
    fn sequence_embedding_cases() {
        let p = params();
        let one = sequence_embedding(&p, &seq(&[1])).unwrap();
        let x = embed_sequence(&p, &[1], &[0.0]).unwrap();
        assert_eq!(one, lstm_forward(&p, &x).unwrap().h.row(0));
        let z = ModelParams::<f64>::zeros(p.dims);
        assert!(sequence_embedding(&z, &seq(&[1, 2, 3])).unwrap().iter().all(|&v| v == 0.0));
        assert!(sequence_embedding(&p, &seq(&[])).is_err());
        let short = sequence_embedding(&p, &seq(&[1, 2])).unwrap();
        let long = sequence_embedding(&p, &seq(&[1, 2, 3])).unwrap();
        assert_ne!(short, long);
    }

    #[test]
    fn prediction_head() {
        let mut p = params();
        p.proj.fill(0.0);
        p.proj_bias = vec![1.0, 2.0, 3.0];
        let x = embed_sequence(&p, &[1, 2, 3], &[0.0; 3]).unwrap();
        let hs = lstm_forward(&p, &x).unwrap();
        let r = predict_masked(&p, &hs, &[0, 2]).unwrap();
        assert_eq!(r.shape(), (2, 3));
        assert!(r.iter_rows().all(|row| row == [1.0, 2.0, 3.0]));
        assert!(predict_masked(&p, &hs, &[]).is_err());
    }

    #[test]
    fn masking_only_affects_later_states() {
        let p = params();
        let x = embed_sequence(&p, &[1, 2, 3, 1, 2], &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let clean = lstm_forward(&p, &x).unwrap();
        let m = mask_sequence(&x, &[2], &p).unwrap();
        let masked = lstm_forward(&p, &m.input).unwrap();
        assert_eq!(clean.h.row(0), masked.h.row(0));
        assert_eq!(clean.h.row(1), masked.h.row(1));
        for t in 2..5 {
            assert_ne!(clean.h.row(t), masked.h.row(t));
        }
    }

    /// Central differences on `sum(v ⊙ r̂)` with respect to every entry of `P`.
    #[test]
    fn projection_gradient_matches_finite_differences() {
        let mut p = params();
        let x = embed_sequence(&p, &[1, 2, 3], &[0.5, -0.2, 0.3]).unwrap();
        let m = mask_sequence(&x, &[1], &p).unwrap();
        let hs = lstm_forward(&p, &m.input).unwrap();
        let v = Matrix::from_vec(1, 3, vec![0.7, -1.3, 0.4]);
        let f = |p: &ModelParams<f64>| {
            let r = predict_masked(p, &hs, &[1]).unwrap();
            r.as_slice().iter().zip(v.as_slice()).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut g = ModelParams::zeros(p.dims);
        let mut dh = Matrix::zeros(3, 3);
        predict_masked_backward(&p, &hs, &[1], &v, &mut dh, &mut g);
        let eps = 1e-6;
        for i in 0..p.proj.as_slice().len() {
            let orig = p.proj.as_slice()[i];
            p.proj.as_mut_slice()[i] = orig + eps;
            let fp = f(&p);
            p.proj.as_mut_slice()[i] = orig - eps;
            let fm = f(&p);
            p.proj.as_mut_slice()[i] = orig;
            let fd = (fp - fm) / (2.0 * eps);
            let an = g.proj.as_slice()[i];
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
        }
    }
}
