//! Multi-seed experiment cells and the λ sweep.

use serde::{Deserialize, Serialize};

use crate::data::{normalize_amounts, split_dataset, Dataset, SplitRatios, Splits};
use crate::evaluation::{evaluate, mean_std, EvalOptions, MeanStd, Report};
use crate::training::{train_with, Checkpoint, EpochRecord, Method, TrainConfig};
use crate::Result;

/// Hybrid weights swept by default.
pub const SWEEP_LAMBDAS: [f64; 4] = [0.1, 0.05, 0.01, 0.005];

/// Splits `ds` and normalizes amounts with train-split statistics.
pub fn prepare_splits(ds: &Dataset, ratios: SplitRatios, seed: u64) -> Result<Splits> {
    let s = split_dataset(ds, ratios, seed)?;
    let train = normalize_amounts(s.train, None)?;
    let stats = train.amount_stats;
    Ok(Splits {
        val: normalize_amounts(s.val, stats)?,
        test: normalize_amounts(s.test, stats)?,
        train,
    })
}

/// Trains on the train split and evaluates on the test split.
pub fn run_cell(
    cfg: &TrainConfig,
    splits: &Splits,
    eval: EvalOptions,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(Checkpoint, Report)> {
    let cp = train_with::<f64>(cfg, &splits.train, on_epoch)?;
    let report = evaluate(&cp, splits, eval)?;
    Ok((cp, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub method: Method,
    pub lambda: f64,
}

impl Variant {
    pub fn label(&self) -> String {
        match self.method {
            Method::Hybrid => format!("hybrid(lambda={})", self.lambda),
            m => m.to_string(),
        }
    }

    pub fn apply(&self, cfg: &TrainConfig) -> TrainConfig {
        TrainConfig {
            method: self.method,
            lambda: self.lambda,
            ..cfg.clone()
        }
    }
}

/// The three single-objective baselines followed by one hybrid per λ.
pub fn sweep_variants(lambdas: &[f64]) -> Vec<Variant> {
    let mut v: Vec<Variant> = [Method::Coles, Method::Cmlm, Method::ColesMasked]
        .into_iter()
        .map(|method| Variant { method, lambda: 0.0 })
        .collect();
    v.extend(lambdas.iter().map(|&lambda| Variant {
        method: Method::Hybrid,
        lambda,
    }));
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub method: Method,
    pub lambda: f64,
    pub seeds: usize,
    pub global_auc: MeanStd,
    pub local_auc: MeanStd,
}

pub fn summarize(variant: Variant, reports: &[Report]) -> Option<SweepRow> {
    let g: Vec<f64> = reports.iter().map(|r| r.global_auc).collect();
    let l: Vec<f64> = reports.iter().map(|r| r.local_auc).collect();
    Some(SweepRow {
        variant: variant.label(),
        method: variant.method,
        lambda: variant.lambda,
        seeds: reports.len(),
        global_auc: mean_std(&g)?,
        local_auc: mean_std(&l)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub variant: String,
    pub global_rank: f64,
    pub local_rank: f64,
    pub mean_rank: f64,
}

/// Rank 1 is best; tied means share the average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        order[i..j].iter().for_each(|&o| out[o] = r);
        i = j;
    }
    out
}

/// Per-task ranks of seed-mean AUCs and their mean across the two tasks.
pub fn mean_ranks(rows: &[SweepRow]) -> Vec<RankRow> {
    let g = ranks(&rows.iter().map(|r| r.global_auc.mean).collect::<Vec<_>>());
    let l = ranks(&rows.iter().map(|r| r.local_auc.mean).collect::<Vec<_>>());
    rows.iter()
        .enumerate()
        .map(|(i, r)| RankRow {
            variant: r.variant.clone(),
            global_rank: g[i],
            local_rank: l[i],
            mean_rank: (g[i] + l[i]) / 2.0,
        })
        .collect()
}
