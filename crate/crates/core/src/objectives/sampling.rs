use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A contiguous slice `[start, start + len)` of sequence `origin`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct View {
    pub origin: usize,
    pub start: usize,
    pub len: usize,
}

impl View {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// View-length law. For a sequence of length `T` the admissible lengths are
/// `[clamp(max(1, floor(min_fraction * T)), min, max), clamp(T, min, max)]`
/// intersected with `[1, T]`; sequences shorter than the lower bound are used
/// whole.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewLenRange {
    pub min: usize,
    pub max: usize,
    #[serde(default)]
    pub min_fraction: f64,
}

impl Default for ViewLenRange {
    fn default() -> Self {
        Self {
            min: 5,
            max: 150,
            min_fraction: 0.25,
        }
    }
}

impl ViewLenRange {
    /// Fixed `[lo, hi]` regardless of sequence length.
    pub fn fixed(lo: usize, hi: usize) -> Self {
        Self {
            min: lo,
            max: hi,
            min_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min == 0 || self.min > self.max {
            return Err(Error::config(format!(
                "view length range [{}, {}] is invalid",
                self.min, self.max
            )));
        }
        if !(0.0..=1.0).contains(&self.min_fraction) {
            return Err(Error::config("view min_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    /// `(lo, hi)` for a sequence of length `t`, before intersecting with `[1, t]`.
    pub fn bounds(&self, t: usize) -> (usize, usize) {
        let frac = ((self.min_fraction * t as f64).floor() as usize).max(1);
        (frac.clamp(self.min, self.max), t.clamp(self.min, self.max))
    }
}

/// `n_views` contiguous slices per sequence: length uniform over the
/// admissible range, start uniform over admissible offsets.
pub fn sample_views<R: Rng + ?Sized>(
    lengths: &[usize],
    n_views: usize,
    range: ViewLenRange,
    rng: &mut R,
) -> Result<Vec<View>> {
    if n_views < 2 {
        return Err(Error::config("n_views must be at least 2"));
    }
    range.validate()?;
    let mut views = Vec::with_capacity(lengths.len() * n_views);
    for (origin, &t) in lengths.iter().enumerate() {
        if t == 0 {
            return Err(Error::invalid(format!("sequence {origin} is empty")));
        }
        let (lo, hi) = range.bounds(t);
        for _ in 0..n_views {
            if t < lo {
                views.push(View { origin, start: 0, len: t });
                continue;
            }
            let len = rng.random_range(lo..=hi.min(t));
            let start = rng.random_range(0..=t - len);
            views.push(View { origin, start, len });
        }
    }
    Ok(views)
}

/// Masked positions per sequence, each list strictly increasing and non-empty.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MaskPlan {
    pub positions: Vec<Vec<usize>>,
}

impl MaskPlan {
    pub fn total(&self) -> usize {
        self.positions.iter().map(Vec::len).sum()
    }
}

/// Masks each position independently with probability `rate`; a sequence
/// that draws no mask gets one uniformly random position.
pub fn sample_mask<R: Rng + ?Sized>(lengths: &[usize], rate: f64, rng: &mut R) -> Result<MaskPlan> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::config(format!("mask rate {rate} must lie in (0, 1)")));
    }
    let positions = lengths
        .iter()
        .map(|&t| {
            let mut pos: Vec<usize> = (0..t).filter(|_| rng.random::<f64>() < rate).collect();
            if pos.is_empty() && t > 0 {
                pos.push(rng.random_range(0..t));
            }
            pos
        })
        .collect();
    Ok(MaskPlan { positions })
}

/// Up to `n_neg` distinct indices drawn uniformly from `[0, pool_size)`
/// without `self_index`; all of them when the pool is too small. Sorted.
pub fn sample_negatives<R: Rng + ?Sized>(
    pool_size: usize,
    n_neg: usize,
    self_index: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if pool_size < 2 {
        return Err(Error::invalid(format!(
            "negative pool of size {pool_size} has no candidates"
        )));
    }
    if self_index >= pool_size {
        return Err(Error::invalid(format!("self index {self_index} outside pool {pool_size}")));
    }
    let available = pool_size - 1;
    let mut out: Vec<usize> = if n_neg >= available {
        (0..available).collect()
    } else {
        index::sample(rng, available, n_neg).into_vec()
    };
    for j in &mut out {
        if *j >= self_index {
            *j += 1;
        }
    }
    out.sort_unstable();
    Ok(out)
}
