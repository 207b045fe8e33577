//! Single-layer unidirectional LSTM with explicit backpropagation through time.

use super::params::{Gradients, ModelParams};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Hidden and cell states, one row per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenStates<T> {
    pub h: Matrix<T>,
    pub c: Matrix<T>,
}

impl<T: Scalar> HiddenStates<T> {
    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }

    pub fn last(&self) -> Option<&[T]> {
        self.len().checked_sub(1).map(|t| self.h.row(t))
    }
}

/// Forward pass record sufficient for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmTrace<T> {
    pub input: Matrix<T>,
    pub states: HiddenStates<T>,
    /// Activated gates `[i, f, g, o]` per step, `T × 4H`.
    gates: Matrix<T>,
}

impl<T: Scalar> LstmTrace<T> {
    pub fn len(&self) -> usize {
        self.input.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.input.rows() == 0
    }
}

/// Runs the recurrence from `h_0 = c_0 = 0` over every row of `input`.
pub fn lstm_forward_traced<T: Scalar>(params: &ModelParams<T>, input: Matrix<T>) -> Result<LstmTrace<T>> {
    let d = params.dims;
    let hd = d.hidden;
    if input.cols() != d.input() {
        return Err(Error::Shape(format!(
            "embedding width {} != k+1 = {}",
            input.cols(),
            d.input()
        )));
    }
    let steps = input.rows();
    let mut h = Matrix::zeros(steps, hd);
    let mut c = Matrix::zeros(steps, hd);
    let mut gates = Matrix::zeros(steps, 4 * hd);
    let zero = vec![T::zero(); hd];
    let mut a = vec![T::zero(); 4 * hd];
    let mut c_new = vec![T::zero(); hd];

    for t in 0..steps {
        a.copy_from_slice(&params.b);
        params.w.matvec_add(input.row(t), &mut a);
        if t > 0 {
            params.u.matvec_add(h.row(t - 1), &mut a);
        }
        let c_prev: &[T] = if t > 0 { c.row(t - 1) } else { &zero };
        let g_row = gates.row_mut(t);
        for j in 0..hd {
            g_row[j] = a[j].sigmoid();
            g_row[hd + j] = a[hd + j].sigmoid();
            g_row[2 * hd + j] = a[2 * hd + j].tanh();
            g_row[3 * hd + j] = a[3 * hd + j].sigmoid();
        }
        for j in 0..hd {
            c_new[j] = g_row[hd + j] * c_prev[j] + g_row[j] * g_row[2 * hd + j];
        }
        let o = &g_row[3 * hd..];
        let h_row = h.row_mut(t);
        for j in 0..hd {
            h_row[j] = o[j] * c_new[j].tanh();
        }
        if !(c_new.iter().all(|x| x.is_finite()) && h_row.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite(format!("LSTM state at step {t}")));
        }
        c.row_mut(t).copy_from_slice(&c_new);
    }
    Ok(LstmTrace {
        input,
        states: HiddenStates { h, c },
        gates,
    })
}

/// Forward pass keeping only the states.
pub fn lstm_forward<T: Scalar>(params: &ModelParams<T>, input: &Matrix<T>) -> Result<HiddenStates<T>> {
    lstm_forward_traced(params, input.clone()).map(|t| t.states)
}

/// Backpropagates `dh` (one row per step, gradient of the loss with respect
/// to each `h_t` as an output) through the recurrence. Accumulates into the
/// gate weights and biases of `grads` and returns the gradient with respect
/// to the input rows.
pub fn lstm_backward<T: Scalar>(
    params: &ModelParams<T>,
    trace: &LstmTrace<T>,
    dh: &Matrix<T>,
    grads: &mut Gradients<T>,
) -> Matrix<T> {
    let hd = params.dims.hidden;
    let steps = trace.len();
    assert_eq!(dh.shape(), (steps, hd), "dh shape");
    let mut dx = Matrix::zeros(steps, params.dims.input());
    let mut dh_next = vec![T::zero(); hd];
    let mut dc_next = vec![T::zero(); hd];
    let mut da = vec![T::zero(); 4 * hd];
    let zero = vec![T::zero(); hd];
    let one = T::one();

    for t in (0..steps).rev() {
        let g = trace.gates.row(t);
        let (gi, gf, gg, go) = (&g[..hd], &g[hd..2 * hd], &g[2 * hd..3 * hd], &g[3 * hd..]);
        let c_t = trace.states.c.row(t);
        let c_prev: &[T] = if t > 0 { trace.states.c.row(t - 1) } else { &zero };
        let dh_t = dh.row(t);
        let mut any = false;
        for j in 0..hd {
            let dh_j = dh_t[j] + dh_next[j];
            let tc = c_t[j].tanh();
            let d_o = dh_j * tc;
            let dc = dh_j * go[j] * (one - tc * tc) + dc_next[j];
            let d_i = dc * gg[j];
            let d_g = dc * gi[j];
            let d_f = dc * c_prev[j];
            dc_next[j] = dc * gf[j];
            da[j] = d_i * gi[j] * (one - gi[j]);
            da[hd + j] = d_f * gf[j] * (one - gf[j]);
            da[2 * hd + j] = d_g * (one - gg[j] * gg[j]);
            da[3 * hd + j] = d_o * go[j] * (one - go[j]);
            any |= dh_j != T::zero() || dc != T::zero();
        }
        if !any {
            dh_next.iter_mut().for_each(|x| *x = T::zero());
            continue;
        }
        grads.w.add_outer(&da, trace.input.row(t));
        for (gb, &a) in grads.b.iter_mut().zip(&da) {
            *gb += a;
        }
        params.w.matvec_t_add(&da, dx.row_mut(t));
        dh_next.iter_mut().for_each(|x| *x = T::zero());
        if t > 0 {
            grads.u.add_outer(&da, trace.states.h.row(t - 1));
            params.u.matvec_t_add(&da, &mut dh_next);
        }
    }
    dx
}
