//! Central finite-difference check of the full training gradient (encoder
//! and objectives composed) on random small instances.

use rand::Rng as _;
use serde::Serialize;

use crate::data::{Dataset, Event, EventSequence, PaddedBatch, Vocabulary};
use crate::encoder::{Dims, ModelParams, TENSOR_NAMES};
use crate::objectives::ViewLenRange;
use crate::rng::{self, Stream};
use crate::training::{compute_gradients, Method, TrainConfig};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradCheckOptions {
    pub seeds: u64,
    pub step: f64,
    pub tolerance: f64,
    pub max_k: usize,
    pub max_hidden: usize,
    pub max_len: usize,
    pub max_batch: usize,
    pub lambda: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            seeds: 10,
            step: 1e-5,
            tolerance: 1e-4,
            max_k: 4,
            max_hidden: 8,
            max_len: 6,
            max_batch: 4,
            lambda: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckCase {
    pub method: Method,
    pub seed: u64,
    pub dims: Dims,
    pub batch: usize,
    pub checked: usize,
    pub max_rel_err: f64,
    /// Tensor and flat index of the worst entry.
    pub worst: (String, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub cases: Vec<GradCheckCase>,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Entries whose analytic and numeric magnitudes are both below this are
/// compared on an absolute scale.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Random instance for `seed`: parameters, one batch and a config.
pub fn instance(method: Method, seed: u64, opts: &GradCheckOptions) -> Result<(ModelParams<f64>, PaddedBatch, TrainConfig)> {
    let mut rng = rng::stream(seed, Stream::Check, &[]);
    let k = rng.random_range(1..=opts.max_k.max(1));
    let hidden = rng.random_range(2.min(opts.max_hidden)..=opts.max_hidden);
    let vocab = 6;
    let batch = rng.random_range(2..=opts.max_batch.max(2));
    let dims = Dims::new(k, vocab, hidden)?;
    let mut params = ModelParams::<f64>::zeros(dims);
    for (_, t) in params.tensors_mut() {
        t.iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
    }
    let sequences = (0..batch)
        .map(|i| {
            let len = rng.random_range(2..=opts.max_len.max(2));
            EventSequence {
                id: format!("g{i}"),
                events: (0..len)
                    .map(|t| Event {
                        mcc: rng.random_range(0..vocab),
                        amount: rng.random_range(-2.0..2.0),
                        time: t as i64,
                    })
                    .collect(),
                label: None,
            }
        })
        .collect();
    let ds = Dataset {
        sequences,
        vocab: Vocabulary::new((1..vocab).map(|c| c.to_string()).collect()),
        num_classes: 0,
        amount_stats: None,
    };
    let pb = PaddedBatch::from_dataset(&ds, &(0..batch).collect::<Vec<_>>());
    let cfg = TrainConfig {
        method,
        lambda: if method == Method::Hybrid { opts.lambda } else { 0.0 },
        rho: 1.0,
        mask_rate: 0.3,
        n_views: 2,
        n_neg: 3,
        n_hard: 2,
        view_len_range: ViewLenRange::fixed(2, opts.max_len.max(2)),
        k,
        hidden,
        seed,
        ..TrainConfig::default()
    };
    Ok((params, pb, cfg))
}

pub fn check_case(method: Method, seed: u64, opts: &GradCheckOptions) -> Result<GradCheckCase> {
    let (mut params, batch, cfg) = instance(method, seed, opts)?;
    let step_seed = rng::derive_seed(seed, Stream::Check, &[1]);
    let analytic = compute_gradients(&params, &batch, &cfg, step_seed)?.grads;
    let mut worst = (0.0, String::new(), 0);
    let mut checked = 0;
    for (ti, name) in TENSOR_NAMES.iter().enumerate() {
        let n = analytic.tensors()[ti].1.len();
        for i in 0..n {
            let orig = params.tensors()[ti].1[i];
            params.tensors_mut()[ti].1[i] = orig + opts.step;
            let lp = compute_gradients(&params, &batch, &cfg, step_seed)?.loss;
            params.tensors_mut()[ti].1[i] = orig - opts.step;
            let lm = compute_gradients(&params, &batch, &cfg, step_seed)?.loss;
            params.tensors_mut()[ti].1[i] = orig;
            let numeric = (lp - lm) / (2.0 * opts.step);
            let e = rel_err(analytic.tensors()[ti].1[i], numeric);
            checked += 1;
            if e > worst.0 || worst.1.is_empty() {
                worst = (e, name.to_string(), i);
            }
        }
    }
    Ok(GradCheckCase {
        method,
        seed,
        dims: params.dims,
        batch: batch.len(),
        checked,
        max_rel_err: worst.0,
        worst: (worst.1, worst.2),
    })
}

pub fn gradcheck(methods: &[Method], opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut cases = Vec::new();
    for &m in methods {
        for seed in 0..opts.seeds {
            cases.push(check_case(m, seed, opts)?);
        }
    }
    let max_rel_err = cases.iter().map(|c| c.max_rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        cases,
        max_rel_err,
        tolerance: opts.tolerance,
    })
}
