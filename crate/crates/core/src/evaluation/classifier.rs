use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::linalg::{softmax_in_place, Matrix};
use crate::rng::{self, Stream};
use crate::{Error, Result};

pub const L2_WEIGHT: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

/// Multinomial logistic regression on standardized inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `C × D`.
    pub w: Matrix<f64>,
    pub b: Vec<f64>,
}

impl LinearClassifier {
    pub fn num_classes(&self) -> usize {
        self.b.len()
    }

    /// Class probabilities, one row per input row.
    pub fn predict_proba(&self, x: &Matrix<f64>) -> Matrix<f64> {
        let mut z = vec![0.0; x.cols()];
        let mut out = Matrix::zeros(x.rows(), self.num_classes());
        for (r, row) in x.iter_rows().enumerate() {
            standardize(row, &self.mean, &self.std, &mut z);
            let p = out.row_mut(r);
            p.copy_from_slice(&self.b);
            self.w.matvec_add(&z, p);
            softmax_in_place(p);
        }
        out
    }
}

fn standardize(x: &[f64], mean: &[f64], std: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = (x[i] - mean[i]) / std[i];
    }
}

/// Full-batch gradient descent on mean cross-entropy plus
/// `L2_WEIGHT / 2 * |W|²`. Classes with no examples are allowed and simply
/// learn low scores.
pub fn fit_softmax(x: &Matrix<f64>, y: &[usize], num_classes: usize, opts: FitOptions) -> Result<LinearClassifier> {
    let (n, d) = x.shape();
    if n == 0 || n != y.len() {
        return Err(Error::Shape(format!("{n} inputs, {} labels", y.len())));
    }
    if let Some(&l) = y.iter().find(|&&l| l >= num_classes) {
        return Err(Error::invalid(format!("label {l} outside {num_classes} classes")));
    }
    if !x.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("classifier input".into()));
    }
    let mut mean = vec![0.0; d];
    for row in x.iter_rows() {
        row.iter().zip(&mut mean).for_each(|(v, m)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut std = vec![0.0; d];
    for row in x.iter_rows() {
        for i in 0..d {
            std[i] += (row[i] - mean[i]).powi(2);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt().max(1e-8));
    let mut xs = Matrix::zeros(n, d);
    for (r, row) in x.iter_rows().enumerate() {
        standardize(row, &mean, &std, xs.row_mut(r));
    }

    let mut rng = rng::stream(opts.seed, Stream::Classifier, &[]);
    let mut w = Matrix::zeros(num_classes, d);
    w.as_mut_slice().iter_mut().for_each(|v| *v = rng.random_range(-0.01..0.01));
    let mut b = vec![0.0; num_classes];

    let mut gw = Matrix::zeros(num_classes, d);
    let mut gb = vec![0.0; num_classes];
    let mut p = vec![0.0; num_classes];
    let scale = 1.0 / n as f64;
    for _ in 0..opts.epochs {
        gw.fill(0.0);
        gb.fill(0.0);
        for (r, row) in xs.iter_rows().enumerate() {
            p.copy_from_slice(&b);
            w.matvec_add(row, &mut p);
            softmax_in_place(&mut p);
            p[y[r]] -= 1.0;
            p.iter_mut().for_each(|v| *v *= scale);
            gw.add_outer(&p, row);
            gb.iter_mut().zip(&p).for_each(|(g, v)| *g += v);
        }
        for (wv, gv) in w.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *wv -= opts.lr * (gv + L2_WEIGHT * *wv);
        }
        b.iter_mut().zip(&gb).for_each(|(bv, gv)| *bv -= opts.lr * gv);
    }
    Ok(LinearClassifier { mean, std, w, b })
}
