use rand::seq::SliceRandom;

use super::Dataset;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// A batch of sequences padded to the longest one. Padded cells hold index 0
/// and amount 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedBatch {
    /// Positions of the batch rows within the source dataset.
    pub indices: Vec<usize>,
    pub t_max: usize,
    /// `B × t_max`, row-major.
    pub mcc: Vec<usize>,
    /// `B × t_max`, row-major.
    pub amount: Vec<f64>,
    pub lengths: Vec<usize>,
    /// `B × t_max`, true iff `t < lengths[b]`.
    pub valid_mask: Vec<bool>,
    pub labels: Vec<Option<usize>>,
}

impl PaddedBatch {
    pub fn from_dataset(ds: &Dataset, indices: &[usize]) -> Self {
        let t_max = indices.iter().map(|&i| ds.sequences[i].len()).max().unwrap_or(0);
        let b = indices.len();
        let mut mcc = vec![0; b * t_max];
        let mut amount = vec![0.0; b * t_max];
        let mut valid_mask = vec![false; b * t_max];
        let mut lengths = Vec::with_capacity(b);
        let mut labels = Vec::with_capacity(b);
        for (row, &i) in indices.iter().enumerate() {
            let seq = &ds.sequences[i];
            for (t, e) in seq.events.iter().enumerate() {
                mcc[row * t_max + t] = e.mcc;
                amount[row * t_max + t] = e.amount;
                valid_mask[row * t_max + t] = true;
            }
            lengths.push(seq.len());
            labels.push(seq.label);
        }
        Self {
            indices: indices.to_vec(),
            t_max,
            mcc,
            amount,
            lengths,
            valid_mask,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Valid MCC indices of row `b`.
    pub fn mcc_row(&self, b: usize) -> &[usize] {
        &self.mcc[b * self.t_max..b * self.t_max + self.lengths[b]]
    }

    /// Valid amounts of row `b`.
    pub fn amount_row(&self, b: usize) -> &[f64] {
        &self.amount[b * self.t_max..b * self.t_max + self.lengths[b]]
    }
}

/// Single-pass stream over a dataset in batches.
pub struct BatchStream<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for BatchStream<'_> {
    type Item = PaddedBatch;

    fn next(&mut self) -> Option<PaddedBatch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = PaddedBatch::from_dataset(self.ds, &self.order[self.pos..end]);
        self.pos = end;
        Some(batch)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.pos).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for BatchStream<'_> {}

/// Every sequence appears exactly once; with `shuffle` the order is a
/// seed-determined permutation, otherwise dataset order.
pub fn make_batches(ds: &Dataset, batch_size: usize, seed: u64, shuffle: bool) -> Result<BatchStream<'_>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be at least 1"));
    }
    if ds.is_empty() {
        return Err(Error::Empty("cannot batch an empty dataset".into()));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    if shuffle {
        order.shuffle(&mut rng::stream(seed, Stream::Shuffle, &[]));
    }
    Ok(BatchStream {
        ds,
        order,
        batch_size,
        pos: 0,
    })
}
