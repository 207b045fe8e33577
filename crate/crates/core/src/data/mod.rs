//! Event-sequence datasets: ingestion, synthesis, normalization, splitting
//! and padded batching.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

mod batch;
mod csv_io;
mod normalize;
mod split;
pub mod synth;

pub use batch::{make_batches, BatchStream, PaddedBatch};
pub use csv_io::{load_csv, read_vocab, write_csv, write_vocab, CsvSchema, LoadOptions, UNK_TOKEN};
pub use normalize::{normalize_amounts, signed_log1p, AmountStats};
pub use split::{split_dataset, SplitRatios, Splits};
pub use synth::{synthesize_dataset, SynthSpec, SyntheticCorpus};

/// Index reserved for codes missing from the vocabulary.
pub const UNK_INDEX: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Vocabulary index in `[0, V)`; 0 is UNK.
    pub mcc: usize,
    /// Raw currency units, or standardized signed-log units once normalized.
    pub amount: f64,
    /// Seconds since the Unix epoch. Used for ordering only.
    pub time: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    pub id: String,
    pub events: Vec<Event>,
    pub label: Option<usize>,
}

impl EventSequence {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Mapping from raw MCC codes to contiguous indices `1..=codes.len()`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    codes: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.codes == other.codes
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(codes: Vec<String>) -> Self {
        Self::new(codes)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.codes
    }
}

impl Vocabulary {
    /// Builds a vocabulary whose `i`-th code receives index `i + 1`.
    pub fn new(codes: Vec<String>) -> Self {
        let lookup = codes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i + 1))
            .collect();
        Self { codes, lookup }
    }

    /// Index of `code`, or [`UNK_INDEX`] when the code is unknown.
    pub fn index(&self, code: &str) -> usize {
        self.lookup.get(code).copied().unwrap_or(UNK_INDEX)
    }

    pub fn code(&self, index: usize) -> Option<&str> {
        index.checked_sub(1).and_then(|i| self.codes.get(i)).map(String::as_str)
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    /// Number of indices including UNK.
    pub fn size(&self) -> usize {
        self.codes.len() + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub sequences: Vec<EventSequence>,
    pub vocab: Vocabulary,
    pub num_classes: usize,
    /// Set once amounts have been normalized.
    pub amount_stats: Option<AmountStats>,
}

impl Dataset {
    pub fn vocab_size(&self) -> usize {
        self.vocab.size()
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn num_events(&self) -> usize {
        self.sequences.iter().map(EventSequence::len).sum()
    }

    /// Same vocabulary and stats, a subset of sequences.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            vocab: self.vocab.clone(),
            num_classes: self.num_classes,
            amount_stats: self.amount_stats,
        }
    }

    pub fn labels(&self) -> Vec<Option<usize>> {
        self.sequences.iter().map(|s| s.label).collect()
    }

    /// Checks sequence, label and index invariants.
    pub fn check_invariants(&self) -> crate::Result<()> {
        let v = self.vocab_size();
        for s in &self.sequences {
            if s.events.is_empty() {
                return Err(crate::Error::invalid(format!("sequence {} is empty", s.id)));
            }
            if let Some(l) = s.label {
                if l >= self.num_classes {
                    return Err(crate::Error::invalid(format!(
                        "sequence {} has label {l} >= {} classes",
                        s.id, self.num_classes
                    )));
                }
            }
            for e in &s.events {
                if e.mcc >= v {
                    return Err(crate::Error::invalid(format!(
                        "sequence {}: mcc index {} >= vocab size {v}",
                        s.id, e.mcc
                    )));
                }
                if !e.amount.is_finite() {
                    return Err(crate::Error::NonFinite(format!("amount in sequence {}", s.id)));
                }
            }
            if s.events.windows(2).any(|w| w[0].time > w[1].time) {
                return Err(crate::Error::invalid(format!("sequence {} is not time-sorted", s.id)));
            }
        }
        Ok(())
    }
}
