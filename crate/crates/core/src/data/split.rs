use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::rng::{self, Stream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Partitions whole sequences. Validation and test sizes are
/// `max(1, floor(ratio * n))`; the remainder goes to train.
pub fn split_dataset(ds: &Dataset, ratios: SplitRatios, seed: u64) -> Result<Splits> {
    let n = ds.len();
    if n < 3 {
        return Err(Error::invalid(format!("cannot split {n} sequences three ways")));
    }
    for r in [ratios.train, ratios.val, ratios.test] {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("split ratio {r} must be positive")));
        }
    }
    let total = ratios.train + ratios.val + ratios.test;
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios sum to {total}, not 1")));
    }
    let n_val = ((ratios.val * n as f64 + 1e-9).floor() as usize).max(1);
    let n_test = ((ratios.test * n as f64 + 1e-9).floor() as usize).max(1);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Stream::Split, &[]));
    let mut val: Vec<usize> = order[..n_val].to_vec();
    let mut test: Vec<usize> = order[n_val..n_val + n_test].to_vec();
    let mut train: Vec<usize> = order[n_val + n_test..].to_vec();
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Ok(Splits {
        train: ds.subset(&train),
        val: ds.subset(&val),
        test: ds.subset(&test),
    })
}
