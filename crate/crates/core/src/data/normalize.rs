use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::{Error, Result};

/// Lower clamp on the standard deviation.
pub const MIN_STD: f64 = 1e-8;

/// Mean and standard deviation of `signed_log1p(amount)` on a training split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmountStats {
    pub mean: f64,
    pub std: f64,
}

/// `sign(a) * ln(1 + |a|)`.
pub fn signed_log1p(a: f64) -> f64 {
    a.signum() * a.abs().ln_1p()
}

/// Replaces each amount with `(signed_log1p(a) - mean) / std`.
///
/// When `stats` is `None` they are computed from `ds` itself, which must then
/// be a training split. The stats used are recorded on the returned dataset.
pub fn normalize_amounts(mut ds: Dataset, stats: Option<AmountStats>) -> Result<Dataset> {
    if ds.amount_stats.is_some() {
        return Err(Error::invalid("dataset amounts are already normalized"));
    }
    for s in &ds.sequences {
        if let Some(e) = s.events.iter().find(|e| !e.amount.is_finite()) {
            return Err(Error::NonFinite(format!("amount {} in sequence {}", e.amount, s.id)));
        }
    }
    let stats = match stats {
        Some(st) => {
            if !(st.mean.is_finite() && st.std.is_finite()) {
                return Err(Error::NonFinite("amount stats".into()));
            }
            AmountStats {
                mean: st.mean,
                std: st.std.max(MIN_STD),
            }
        }
        None => {
            let n = ds.num_events();
            if n == 0 {
                return Err(Error::Empty("no events to compute amount stats".into()));
            }
            let logs = ds
                .sequences
                .iter()
                .flat_map(|s| s.events.iter().map(|e| signed_log1p(e.amount)));
            // shifted by the first value so constant input gives an exact mean
            let first = logs.clone().next().unwrap_or(0.0);
            let mean = first + logs.clone().map(|x| x - first).sum::<f64>() / n as f64;
            let var = logs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            AmountStats {
                mean,
                std: var.sqrt().max(MIN_STD),
            }
        }
    };
    for s in &mut ds.sequences {
        for e in &mut s.events {
            e.amount = (signed_log1p(e.amount) - stats.mean) / stats.std;
        }
    }
    ds.amount_stats = Some(stats);
    Ok(ds)
}
