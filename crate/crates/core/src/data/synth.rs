//! Class-conditional Markov generator over MCC codes.
//!
//! Class `c` follows `M_c = (1 - beta) * M_base + beta * M_perm(c)`, where
//! `M_base` is a shared random stochastic matrix and `M_perm(c)` puts
//! `perm_mass` on a class-specific permutation target and spreads the rest
//! uniformly over the other codes. Amounts are lognormal with a per-code
//! log-mean. Because the transition law is known, the generator also acts as
//! an oracle for both evaluation tasks.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Event, EventSequence, Vocabulary};
use crate::linalg::Matrix;
use crate::rng::{self, Stream};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub num_classes: usize,
    /// Number of distinct MCC codes generated (vocabulary is this plus UNK).
    pub num_codes: usize,
    pub num_sequences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Weight of the class-specific component.
    pub beta: f64,
    /// Mass the class-specific component puts on its permutation target.
    pub perm_mass: f64,
    /// Standard deviation of log-amount around the per-code log-mean.
    pub amount_sigma: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 2,
            num_codes: 20,
            num_sequences: 3000,
            min_len: 50,
            max_len: 150,
            beta: 0.6,
            perm_mass: 0.8,
            amount_sigma: 0.5,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_codes < 2 {
            return Err(Error::invalid("synthetic spec needs at least 2 MCC codes"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("synthetic spec needs at least 2 classes"));
        }
        if self.num_sequences == 0 {
            return Err(Error::invalid("synthetic spec needs at least one sequence"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::invalid(format!(
                "invalid length range [{}, {}]",
                self.min_len, self.max_len
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) || !(0.0..=1.0).contains(&self.perm_mass) {
            return Err(Error::invalid("beta and perm_mass must lie in [0, 1]"));
        }
        if !(self.amount_sigma.is_finite() && self.amount_sigma >= 0.0) {
            return Err(Error::invalid("amount_sigma must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub spec: SynthSpec,
    pub dataset: Dataset,
    /// Per-class row-stochastic transition matrices over code states.
    pub transitions: Vec<Matrix<f64>>,
    pub amount_log_means: Vec<f64>,
}

/// Raw MCC code emitted for state `m`.
pub fn state_code(m: usize) -> String {
    (5000 + m).to_string()
}

fn sample_row(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.len() - 1
}

pub fn synthesize_dataset(spec: &SynthSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let v = spec.num_codes;
    let mut rng = rng::stream(seed, Stream::Synth, &[]);

    let mut base = Matrix::<f64>::zeros(v, v);
    for i in 0..v {
        let row = base.row_mut(i);
        for x in row.iter_mut() {
            *x = Exp1.sample(&mut rng);
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }

    let off = (1.0 - spec.perm_mass) / (v - 1) as f64;
    let transitions: Vec<Matrix<f64>> = (0..spec.num_classes)
        .map(|_| {
            let mut perm: Vec<usize> = (0..v).collect();
            perm.shuffle(&mut rng);
            let mut m = Matrix::zeros(v, v);
            for (i, &target) in perm.iter().enumerate() {
                for j in 0..v {
                    let p = if target == j { spec.perm_mass } else { off };
                    m.set(i, j, (1.0 - spec.beta) * base.get(i, j) + spec.beta * p);
                }
                let row = m.row_mut(i);
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
            }
            m
        })
        .collect();

    let amount_log_means: Vec<f64> = (0..v).map(|_| rng.random_range(1.0..6.0)).collect();
    let noise = Normal::new(0.0, spec.amount_sigma).map_err(|e| Error::invalid(e.to_string()))?;

    let vocab = Vocabulary::new((0..v).map(state_code).collect());
    let mut sequences = Vec::with_capacity(spec.num_sequences);
    for n in 0..spec.num_sequences {
        let class = n % spec.num_classes;
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut time: i64 = 1_600_000_000 + rng.random_range(0..86_400 * 365);
        let mut state = rng.random_range(0..v);
        let mut events = Vec::with_capacity(len);
        for t in 0..len {
            if t > 0 {
                state = sample_row(transitions[class].row(state), rng.random::<f64>());
                time += rng.random_range(60..86_400);
            }
            let amount = (amount_log_means[state] + noise.sample(&mut rng)).exp();
            events.push(Event {
                mcc: state + 1,
                amount: ((amount * 100.0).round() / 100.0).max(0.01),
                time,
            });
        }
        sequences.push(EventSequence {
            id: format!("syn{n:06}"),
            events,
            label: Some(class),
        });
    }

    Ok(SyntheticCorpus {
        spec: spec.clone(),
        dataset: Dataset {
            sequences,
            vocab,
            num_classes: spec.num_classes,
            amount_stats: None,
        },
        transitions,
        amount_log_means,
    })
}

impl SyntheticCorpus {
    /// Bayes reference for the local task: for every position with a
    /// successor, the true class's transition row from the current code,
    /// laid out over vocabulary indices (UNK column is zero). Returns the
    /// score matrix and the true next indices, in sequence-then-time order.
    pub fn next_mcc_oracle_scores(&self, ds: &Dataset) -> Result<(Matrix<f64>, Vec<usize>)> {
        let v = self.spec.num_codes;
        if ds.vocab_size() != v + 1 {
            return Err(Error::VocabMismatch(format!(
                "dataset vocab {} vs generator {}",
                ds.vocab_size(),
                v + 1
            )));
        }
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for s in &ds.sequences {
            let class = s
                .label
                .ok_or_else(|| Error::invalid(format!("sequence {} has no label", s.id)))?;
            for w in s.events.windows(2) {
                let mut row = vec![0.0; v + 1];
                if w[0].mcc == 0 {
                    row[1..].iter_mut().for_each(|x| *x = 1.0 / v as f64);
                } else {
                    row[1..].copy_from_slice(self.transitions[class].row(w[0].mcc - 1));
                }
                rows.push(row);
                labels.push(w[1].mcc);
            }
        }
        Ok((Matrix::from_rows(&rows), labels))
    }

    /// Empirical transition frequencies of class `class` in `ds`, rows with
    /// no outgoing transitions left at zero.
    pub fn empirical_transitions(&self, ds: &Dataset, class: usize) -> Matrix<f64> {
        let v = self.spec.num_codes;
        let mut counts = Matrix::<f64>::zeros(v, v);
        for s in ds.sequences.iter().filter(|s| s.label == Some(class)) {
            for w in s.events.windows(2) {
                let (a, b) = (w[0].mcc - 1, w[1].mcc - 1);
                counts.set(a, b, counts.get(a, b) + 1.0);
            }
        }
        for i in 0..v {
            let row = counts.row_mut(i);
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|x| *x /= s);
            }
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            num_sequences: 40,
            min_len: 5,
            max_len: 12,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let c = synthesize_dataset(&small(), 3).unwrap();
        for m in &c.transitions {
            for row in m.iter_rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p > 0.0));
            }
        }
        c.dataset.check_invariants().unwrap();
        assert_eq!(c.dataset.vocab_size(), 21);
        assert!(c.dataset.sequences.iter().all(|s| (5..=12).contains(&s.len())));
    }

    #[test]
    fn beta_zero_shares_one_law() {
        let spec = SynthSpec { beta: 0.0, ..small() };
        let c = synthesize_dataset(&spec, 9).unwrap();
        assert_eq!(c.transitions[0], c.transitions[1]);
    }

    #[test]
    fn deterministic() {
        let a = synthesize_dataset(&small(), 11).unwrap();
        let b = synthesize_dataset(&small(), 11).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = synthesize_dataset(&small(), 12).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn invalid_specs() {
        assert!(synthesize_dataset(&SynthSpec { num_codes: 1, ..small() }, 0).is_err());
        assert!(synthesize_dataset(&SynthSpec { num_classes: 1, ..small() }, 0).is_err());
    }

    #[test]
    fn oracle_rows_follow_true_class() {
        let c = synthesize_dataset(&small(), 5).unwrap();
        let ds = c.dataset.subset(&[0, 1]);
        let (scores, labels) = c.next_mcc_oracle_scores(&ds).unwrap();
        let expected: usize = ds.sequences.iter().map(|s| s.len() - 1).sum();
        assert_eq!(scores.rows(), expected);
        assert_eq!(labels.len(), expected);
        let s0 = &ds.sequences[0];
        let first = s0.events[0].mcc - 1;
        assert_eq!(&scores.row(0)[1..], c.transitions[s0.label.unwrap()].row(first));
        assert_eq!(scores.get(0, 0), 0.0);
    }
}
