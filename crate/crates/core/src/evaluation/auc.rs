use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Mann–Whitney AUC: the probability that a random positive outscores a
/// random negative, ties counting one half.
///
/// Ranks are kept doubled so the statistic is an exact integer before the
/// single final division.
pub fn roc_auc_binary(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u128;
    let neg = labels.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("ROC-AUC needs both positive and negative examples"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum over positives of 2 * (average 1-based rank)
    let mut rank2_pos: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let tied_pos = order[i..j].iter().filter(|&&o| labels[o]).count() as u128;
        rank2_pos += tied_pos * (i as u128 + 1 + j as u128);
        i = j;
    }
    let u2 = rank2_pos - pos * (pos + 1);
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAuc {
    pub class: usize,
    pub support: usize,
    /// `None` when the class had no positives or no negatives.
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedAuc {
    pub auc: f64,
    pub per_class: Vec<ClassAuc>,
}

impl WeightedAuc {
    pub fn skipped(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_class.iter().filter(|c| c.auc.is_none()).map(|c| c.class)
    }
}

/// One-vs-rest AUC per class averaged with weights proportional to class
/// support. Classes without both positives and negatives are skipped. With
/// two columns the result is the binary AUC of column 1.
pub fn roc_auc_weighted(scores: &Matrix<f64>, labels: &[usize]) -> Result<WeightedAuc> {
    let (n, c) = scores.shape();
    if n != labels.len() {
        return Err(Error::Shape(format!("{n} score rows, {} labels", labels.len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::invalid(format!("label {l} outside {c} score columns")));
    }
    let mut support = vec![0usize; c];
    for &l in labels {
        support[l] += 1;
    }
    if c == 2 {
        let pos: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        let col: Vec<f64> = scores.iter_rows().map(|r| r[1]).collect();
        let auc = roc_auc_binary(&col, &pos)?;
        let per_class = (0..2)
            .map(|k| ClassAuc {
                class: k,
                support: support[k],
                auc: Some(if k == 1 { auc } else { 1.0 - auc }),
            })
            .collect();
        return Ok(WeightedAuc { auc, per_class });
    }

    let mut per_class = Vec::with_capacity(c);
    let (mut num, mut den) = (0.0, 0usize);
    for k in 0..c {
        let auc = if support[k] == 0 || support[k] == n {
            None
        } else {
            let pos: Vec<bool> = labels.iter().map(|&l| l == k).collect();
            let col: Vec<f64> = scores.iter_rows().map(|r| r[k]).collect();
            Some(roc_auc_binary(&col, &pos)?)
        };
        if let Some(a) = auc {
            num += support[k] as f64 * a;
            den += support[k];
        }
        per_class.push(ClassAuc {
            class: k,
            support: support[k],
            auc,
        });
    }
    if den == 0 {
        return Err(Error::invalid("no class has both positive and negative examples"));
    }
    Ok(WeightedAuc {
        auc: num / den as f64,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let y = [false, false, true, true];
        assert_eq!(roc_auc_binary(&s, &y).unwrap(), 0.75);
        assert_eq!(roc_auc_binary(&[1.0, 2.0, 3.0], &[false, true, true]).unwrap(), 1.0);
        assert_eq!(roc_auc_binary(&[0.3; 5], &[false, true, true, false, true]).unwrap(), 0.5);
        assert!(roc_auc_binary(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_auc_binary(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn weighted_hand_example() {
        // supports (2, 2, 4); class 0 perfectly ranked, class 1 at chance,
        // class 2 three quarters of pairs concordant
        let labels = [0, 0, 1, 1, 2, 2, 2, 2];
        let col0 = [0.9, 0.8, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        let col1 = [0.5; 8];
        let col2 = [0.1, 0.3, 0.1, 0.3, 0.2, 0.2, 0.4, 0.4];
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![col0[i], col1[i], col2[i]]).collect();
        let w = roc_auc_weighted(&Matrix::from_rows(&rows), &labels).unwrap();
        let aucs: Vec<f64> = w.per_class.iter().map(|c| c.auc.unwrap()).collect();
        assert_eq!(aucs, vec![1.0, 0.5, 0.75]);
        assert!((w.auc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn skips_unscorable_classes() {
        let rows = vec![vec![0.2, 0.5, 0.3], vec![0.1, 0.2, 0.7], vec![0.3, 0.6, 0.1]];
        let w = roc_auc_weighted(&Matrix::from_rows(&rows), &[1, 2, 1]).unwrap();
        assert_eq!(w.skipped().collect::<Vec<_>>(), vec![0]);
        assert_eq!(w.auc, 1.0);
        let rows = vec![vec![0.2, 0.5, 0.3], vec![0.1, 0.2, 0.7]];
        assert!(roc_auc_weighted(&Matrix::from_rows(&rows), &[1, 1]).is_err());
    }
}
