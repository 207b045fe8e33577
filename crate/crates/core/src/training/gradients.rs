//! Loss and exact gradients of one training batch.
//!
//! Each objective branch draws from its own random stream derived from the
//! step seed (views/masks for the contrastive branch, masks/negatives for the
//! masked branch), so a hybrid step sees exactly the samples the two pure
//! methods would see with the same seed.

use crate::data::PaddedBatch;
use crate::encoder::{
    embed_sequence, lstm_backward, lstm_forward_traced, mask_sequence, predict_masked, predict_masked_backward,
    scatter_input_grads, Gradients, LstmTrace, ModelParams,
};
use crate::linalg::{axpy, Matrix};
use crate::objectives::{
    cmlm_loss, coles_loss, sample_mask, sample_negatives, sample_views, MaskPlan, MaskedBatch,
};
use crate::rng;
use crate::scalar::Scalar;
use crate::training::{Method, TrainConfig};
use crate::{Error, Result};

const COLES_STREAM: u64 = 0;
const CMLM_STREAM: u64 = 1;

#[derive(Clone, Debug)]
pub struct StepOutput<T> {
    /// Weighted total: `coles + weight * cmlm`.
    pub loss: T,
    pub coles: Option<T>,
    pub cmlm: Option<T>,
    pub grads: Gradients<T>,
}

/// Whether `batch` has enough material for `method`: two sequences for the
/// contrastive loss, two masked positions for the masked loss.
pub fn batch_is_usable(batch: &PaddedBatch, method: Method) -> bool {
    let views_ok = batch.len() >= 2;
    let masks_ok = batch.len() >= 2 || batch.lengths.first().is_some_and(|&t| t >= 2);
    match method {
        Method::Coles | Method::ColesMasked | Method::Hybrid if !views_ok => false,
        Method::Cmlm | Method::Hybrid if !masks_ok => false,
        _ => true,
    }
}

fn branch_rng(step_seed: u64, branch: u64) -> rng::Rng {
    rng::stream(step_seed, rng::Stream::Step, &[branch])
}

pub fn compute_gradients<T: Scalar>(
    params: &ModelParams<T>,
    batch: &PaddedBatch,
    cfg: &TrainConfig,
    step_seed: u64,
) -> Result<StepOutput<T>> {
    let mut grads = ModelParams::zeros(params.dims);
    let mut loss = T::zero();
    let mut coles = None;
    let mut cmlm = None;
    match cfg.method {
        Method::Coles | Method::ColesMasked | Method::Hybrid => {
            let masked = cfg.method == Method::ColesMasked;
            let l = coles_branch(params, batch, cfg, masked, T::one(), step_seed, &mut grads)?;
            if !l.is_finite() {
                return Err(Error::NonFinite("contrastive loss".into()));
            }
            loss += l;
            coles = Some(l);
        }
        Method::Cmlm => {}
    }
    let weight = T::of(cfg.cmlm_weight());
    if cfg.method.uses_masked_prediction() {
        let l = cmlm_branch(params, batch, cfg, weight, step_seed, &mut grads)?;
        if !l.is_finite() {
            return Err(Error::NonFinite("masked loss".into()));
        }
        loss += weight * l;
        cmlm = Some(l);
    }
    Ok(StepOutput {
        loss,
        coles,
        cmlm,
        grads,
    })
}

/// Contrastive branch; accumulates `weight * ∂loss` into `grads`.
pub(crate) fn coles_branch<T: Scalar>(
    params: &ModelParams<T>,
    batch: &PaddedBatch,
    cfg: &TrainConfig,
    masked: bool,
    weight: T,
    step_seed: u64,
    grads: &mut Gradients<T>,
) -> Result<T> {
    let mut rng = branch_rng(step_seed, COLES_STREAM);
    let views = sample_views(&batch.lengths, cfg.n_views, cfg.view_len_range, &mut rng)?;
    let plan = if masked {
        let lens: Vec<usize> = views.iter().map(|v| v.len).collect();
        sample_mask(&lens, cfg.mask_rate, &mut rng)?
    } else {
        MaskPlan {
            positions: vec![Vec::new(); views.len()],
        }
    };

    let h = params.dims.hidden;
    let mut traces: Vec<LstmTrace<T>> = Vec::with_capacity(views.len());
    let mut z = Matrix::zeros(views.len(), h);
    for (m, v) in views.iter().enumerate() {
        let mcc = &batch.mcc_row(v.origin)[v.start..v.end()];
        let amount = &batch.amount_row(v.origin)[v.start..v.end()];
        let mut x = embed_sequence(params, mcc, amount)?;
        if masked {
            x = mask_sequence(&x, &plan.positions[m], params)?.input;
        }
        let trace = lstm_forward_traced(params, x)?;
        z.row_mut(m).copy_from_slice(trace.states.last().expect("views are non-empty"));
        traces.push(trace);
    }
    let origins: Vec<usize> = views.iter().map(|v| v.origin).collect();
    let out = coles_loss(&z, &origins, T::of(cfg.rho), cfg.n_hard)?;

    for (m, (v, trace)) in views.iter().zip(&traces).enumerate() {
        let g = out.grad.row(m);
        if g.iter().all(|&x| x == T::zero()) {
            continue;
        }
        let mut dh = Matrix::zeros(v.len, h);
        axpy(weight, g, dh.row_mut(v.len - 1));
        let dx = lstm_backward(params, trace, &dh, grads);
        let mcc = &batch.mcc_row(v.origin)[v.start..v.end()];
        scatter_input_grads(&dx, mcc, &plan.positions[m], grads);
    }
    Ok(out.loss)
}

/// Masked-prediction branch; accumulates `weight * ∂loss` into `grads`.
pub(crate) fn cmlm_branch<T: Scalar>(
    params: &ModelParams<T>,
    batch: &PaddedBatch,
    cfg: &TrainConfig,
    weight: T,
    step_seed: u64,
    grads: &mut Gradients<T>,
) -> Result<T> {
    let mut rng = branch_rng(step_seed, CMLM_STREAM);
    let plan = sample_mask(&batch.lengths, cfg.mask_rate, &mut rng)?;
    let pool = plan.total();
    if pool < 2 {
        return Err(Error::invalid("masked loss needs at least two masked positions in the batch"));
    }
    let width = params.dims.input();
    let mut targets = Matrix::zeros(pool, width);
    let mut predictions = Matrix::zeros(pool, width);
    let mut traces = Vec::with_capacity(batch.len());
    let mut offset = 0;
    for (b, positions) in plan.positions.iter().enumerate() {
        let x = embed_sequence(params, batch.mcc_row(b), batch.amount_row(b))?;
        let masked = mask_sequence(&x, positions, params)?;
        let trace = lstm_forward_traced(params, masked.input)?;
        let pred = predict_masked(params, &trace.states, positions)?;
        for i in 0..positions.len() {
            targets.row_mut(offset + i).copy_from_slice(masked.targets.row(i));
            predictions.row_mut(offset + i).copy_from_slice(pred.row(i));
        }
        offset += positions.len();
        traces.push(trace);
    }
    let negatives = (0..pool)
        .map(|i| sample_negatives(pool, cfg.n_neg, i, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mb = MaskedBatch {
        targets,
        predictions,
        negatives,
    };
    let out = cmlm_loss(&mb)?;

    let k = params.dims.k;
    let h = params.dims.hidden;
    let mut offset = 0;
    for (b, (positions, trace)) in plan.positions.iter().zip(&traces).enumerate() {
        let n = positions.len();
        let mut d_pred = Matrix::zeros(n, width);
        for i in 0..n {
            axpy(weight, out.grad_predictions.row(offset + i), d_pred.row_mut(i));
        }
        let mut dh = Matrix::zeros(trace.len(), h);
        predict_masked_backward(params, &trace.states, positions, &d_pred, &mut dh, grads);
        let dx = lstm_backward(params, trace, &dh, grads);
        let mcc = batch.mcc_row(b);
        scatter_input_grads(&dx, mcc, positions, grads);
        for (i, &p) in positions.iter().enumerate() {
            let g = &out.grad_targets.row(offset + i)[..k];
            axpy(weight, g, grads.mcc_table.row_mut(mcc[p]));
        }
        offset += n;
    }
    Ok(out.loss)
}
