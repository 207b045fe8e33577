//! Frozen-encoder evaluation: sequence classification from the last hidden
//! state (global task) and next-MCC prediction from every hidden state (local
//! task), both scored with weighted one-vs-rest ROC-AUC.

mod auc;
mod classifier;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use auc::{roc_auc_binary, roc_auc_weighted, ClassAuc, WeightedAuc};
pub use classifier::{fit_softmax, FitOptions, LinearClassifier, L2_WEIGHT};

use crate::data::{Dataset, Splits};
use crate::encoder::{embed_sequence, lstm_forward, sequence_embedding};
use crate::linalg::Matrix;
use crate::rng::{self, Stream};
use crate::training::Checkpoint;
use crate::{Error, Result};

/// Linear next-MCC head over frozen hidden states.
pub type ProbeHead = LinearClassifier;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub ids: Vec<String>,
    /// `N × H`.
    pub vectors: Matrix<f64>,
    /// Present when every sequence is labeled.
    pub labels: Option<Vec<usize>>,
}

impl EmbeddingTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `seq_id,v_0,...,v_{H-1}`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let header = std::iter::once("seq_id".to_string()).chain((0..self.vectors.cols()).map(|i| format!("v_{i}")));
        w.write_record(header)?;
        for (id, row) in self.ids.iter().zip(self.vectors.iter_rows()) {
            w.write_record(std::iter::once(id.clone()).chain(row.iter().map(|v| v.to_string())))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `f(x)` for every sequence of `ds`.
pub fn extract_embeddings(cp: &Checkpoint, ds: &Dataset) -> Result<EmbeddingTable> {
    cp.check_dataset(ds)?;
    let h = cp.dims.hidden;
    let mut vectors = Matrix::zeros(ds.len(), h);
    for (i, s) in ds.sequences.iter().enumerate() {
        vectors.row_mut(i).copy_from_slice(&sequence_embedding(&cp.params, s)?);
    }
    let labels = ds.sequences.iter().map(|s| s.label).collect::<Option<Vec<_>>>();
    Ok(EmbeddingTable {
        ids: ds.sequences.iter().map(|s| s.id.clone()).collect(),
        vectors,
        labels,
    })
}

/// Fits on `train` and returns the classifier with class probabilities for
/// every row of `val`.
pub fn fit_linear_classifier(
    train: &EmbeddingTable,
    val: &EmbeddingTable,
    opts: FitOptions,
) -> Result<(LinearClassifier, Matrix<f64>)> {
    let y = train
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("training embeddings are unlabeled"))?;
    let val_max = val.labels.as_ref().and_then(|l| l.iter().max().copied());
    let classes = y.iter().copied().chain(val_max).max().map_or(0, |m| m + 1);
    let mut present = vec![false; classes];
    y.iter().for_each(|&l| present[l] = true);
    if let Some(c) = present.iter().position(|&p| !p) {
        return Err(Error::invalid(format!("class {c} has no training example")));
    }
    if classes < 2 {
        return Err(Error::invalid("classifier needs at least two classes"));
    }
    let clf = fit_softmax(&train.vectors, y, classes, opts)?;
    let scores = clf.predict_proba(&val.vectors);
    Ok((clf, scores))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Share of sequences whose positions train the head; the rest are scored.
    pub fit_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct LocalProbe {
    pub head: ProbeHead,
    /// Sequence indices (into the probed dataset) whose positions were scored,
    /// ascending.
    pub scored_sequences: Vec<usize>,
    /// Next-MCC probabilities for every scored position, in sequence-then-time order.
    pub scores: Matrix<f64>,
    pub targets: Vec<usize>,
    pub auc: WeightedAuc,
}

/// `(h_t, mcc_{t+1})` for every position with a successor.
fn probe_pairs(cp: &Checkpoint, ds: &Dataset, seqs: &[usize]) -> Result<(Matrix<f64>, Vec<usize>)> {
    let h = cp.dims.hidden;
    let n: usize = seqs.iter().map(|&i| ds.sequences[i].len().saturating_sub(1)).sum();
    let mut x = Matrix::zeros(n, h);
    let mut y = Vec::with_capacity(n);
    let mut r = 0;
    for &i in seqs {
        let s = &ds.sequences[i];
        if s.len() < 2 {
            continue;
        }
        let mcc: Vec<usize> = s.events.iter().map(|e| e.mcc).collect();
        let amount: Vec<f64> = s.events.iter().map(|e| e.amount).collect();
        let states = lstm_forward(&cp.params, &embed_sequence(&cp.params, &mcc, &amount)?)?;
        for t in 0..s.len() - 1 {
            x.row_mut(r).copy_from_slice(states.h.row(t));
            y.push(mcc[t + 1]);
            r += 1;
        }
    }
    Ok((x, y))
}

/// Trains a linear next-MCC head on frozen hidden states. Sequences are split
/// into fit and score sets so no sequence contributes to both; every position
/// of the score set is scored.
pub fn train_local_probe(cp: &Checkpoint, ds: &Dataset, opts: ProbeOptions) -> Result<LocalProbe> {
    cp.check_dataset(ds)?;
    if !(opts.fit_fraction > 0.0 && opts.fit_fraction < 1.0) {
        return Err(Error::config("probe fit_fraction must lie in (0, 1)"));
    }
    let mut usable: Vec<usize> = (0..ds.len()).filter(|&i| ds.sequences[i].len() >= 2).collect();
    if usable.len() < 2 {
        return Err(Error::invalid("local probe needs two sequences of length at least 2"));
    }
    usable.shuffle(&mut rng::stream(opts.seed, Stream::Probe, &[]));
    let n_fit = ((opts.fit_fraction * usable.len() as f64).round() as usize).clamp(1, usable.len() - 1);
    let mut fit = usable[..n_fit].to_vec();
    let mut scored = usable[n_fit..].to_vec();
    fit.sort_unstable();
    scored.sort_unstable();

    let (x_fit, y_fit) = probe_pairs(cp, ds, &fit)?;
    let fit_opts = FitOptions {
        epochs: opts.epochs,
        lr: opts.lr,
        seed: opts.seed,
    };
    let head = fit_softmax(&x_fit, &y_fit, cp.dims.vocab, fit_opts)?;
    let (x_score, targets) = probe_pairs(cp, ds, &scored)?;
    let scores = head.predict_proba(&x_score);
    let auc = roc_auc_weighted(&scores, &targets)?;
    Ok(LocalProbe {
        head,
        scored_sequences: scored,
        scores,
        targets,
        auc,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub classifier: FitOptions,
    pub probe: ProbeOptions,
}

impl EvalOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            classifier: FitOptions {
                epochs: 300,
                lr: 0.5,
                seed,
            },
            probe: ProbeOptions {
                epochs: 200,
                lr: 0.5,
                seed,
                fit_fraction: 0.5,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    /// `global` or `local`.
    pub task: String,
    pub class: usize,
    pub support: usize,
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: String,
    pub lambda: f64,
    pub seed: u64,
    pub global_auc: f64,
    pub local_auc: f64,
    pub per_class: Vec<PerClass>,
    pub config_hash: String,
}

/// Global AUC: classifier fit on train-split embeddings, scored on test.
/// Local AUC: probe fit and scored on disjoint halves of the test split.
pub fn evaluate(cp: &Checkpoint, splits: &Splits, opts: EvalOptions) -> Result<Report> {
    let train = extract_embeddings(cp, &splits.train)?;
    let test = extract_embeddings(cp, &splits.test)?;
    let (_, scores) = fit_linear_classifier(&train, &test, opts.classifier)?;
    let labels = test
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("test split is unlabeled"))?;
    let global = roc_auc_weighted(&scores, labels)?;
    let local = train_local_probe(cp, &splits.test, opts.probe)?;

    let mut per_class = Vec::new();
    for (task, w) in [("global", &global), ("local", &local.auc)] {
        per_class.extend(w.per_class.iter().map(|c| PerClass {
            task: task.into(),
            class: c.class,
            support: c.support,
            auc: c.auc,
        }));
    }
    Ok(Report {
        method: cp.config.method.to_string(),
        lambda: cp.config.cmlm_weight(),
        seed: cp.config.seed,
        global_auc: global.auc,
        local_auc: local.auc.auc,
        per_class,
        config_hash: cp.config_hash.clone(),
    })
}

impl Report {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

pub fn mean_std(xs: &[f64]) -> Option<MeanStd> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some(MeanStd { mean, std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{normalize_amounts, split_dataset, synthesize_dataset, SplitRatios, SynthSpec};
    use crate::encoder::ModelParams;
    use crate::training::TrainConfig;

    fn setup() -> (Checkpoint, Splits) {
        let spec = SynthSpec {
            num_sequences: 100,
            min_len: 5,
            max_len: 15,
            ..SynthSpec::default()
        };
        let ds = synthesize_dataset(&spec, 1).unwrap().dataset;
        let s = split_dataset(&ds, SplitRatios::default(), 2).unwrap();
        let train = normalize_amounts(s.train, None).unwrap();
        let stats = train.amount_stats;
        let splits = Splits {
            val: normalize_amounts(s.val, stats).unwrap(),
            test: normalize_amounts(s.test, stats).unwrap(),
            train,
        };
        let cfg = TrainConfig {
            k: 3,
            hidden: 5,
            ..TrainConfig::default()
        };
        (Checkpoint::initial(&cfg, &splits.train).unwrap(), splits)
    }

    #[test]
    fn zero_encoder_gives_zero_table() {
        let (mut cp, splits) = setup();
        cp.params = ModelParams::zeros(cp.dims);
        let t = extract_embeddings(&cp, &splits.train).unwrap();
        assert_eq!(t.len(), splits.train.len());
        assert!(t.vectors.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vocab_mismatch_is_refused() {
        let (cp, mut splits) = setup();
        splits.test.vocab = crate::data::Vocabulary::new(vec!["x".into()]);
        assert!(matches!(extract_embeddings(&cp, &splits.test), Err(Error::VocabMismatch(_))));
    }

    #[test]
    fn probe_leaves_encoder_untouched() {
        let (cp, splits) = setup();
        let before = cp.params.fingerprint();
        let opts = EvalOptions::with_seed(4).probe;
        let p = train_local_probe(&cp, &splits.train, opts).unwrap();
        assert_eq!(cp.params.fingerprint(), before);
        let n: usize = p.scored_sequences.iter().map(|&i| splits.train.sequences[i].len() - 1).sum();
        assert_eq!(p.targets.len(), n);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let (cp, splits) = setup();
        let mut opts = EvalOptions::with_seed(3);
        opts.classifier.epochs = 20;
        opts.probe.epochs = 20;
        let a = evaluate(&cp, &splits, opts).unwrap();
        let b = evaluate(&cp, &splits, opts).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.global_auc) && (0.0..=1.0).contains(&a.local_auc));
    }

    #[test]
    fn mean_and_sample_std() {
        let m = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert_eq!(mean_std(&[5.0]).unwrap().std, 0.0);
        assert!(mean_std(&[]).is_none());
    }
}
