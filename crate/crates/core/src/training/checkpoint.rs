//! JSON checkpoint container.
//!
//! Fields: `version`, `dims {k, vocab, hidden}`, `params` (each tensor as a
//! row-major array), `adam {step, m, v}`, `epoch` (completed epochs),
//! `config_hash`, `config`, `loss_history` (mean train loss per epoch),
//! `vocab` (raw codes in index order, UNK excluded) and `amount_stats`.
//! Floats are written in shortest round-trip form, so save/load is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{AmountStats, Dataset, Vocabulary};
use crate::encoder::{Dims, ModelParams};
use crate::training::{AdamState, TrainConfig};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub dims: Dims,
    pub params: ModelParams<f64>,
    pub adam: AdamState<f64>,
    pub epoch: usize,
    pub config_hash: String,
    pub config: TrainConfig,
    pub loss_history: Vec<f64>,
    pub vocab: Vocabulary,
    pub amount_stats: Option<AmountStats>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

impl Checkpoint {
    /// Fresh checkpoint at epoch 0 with parameters initialized from the config seed.
    pub fn initial(cfg: &TrainConfig, ds: &Dataset) -> Result<Self> {
        let dims = Dims::new(cfg.k, ds.vocab_size(), cfg.hidden)?;
        Ok(Self {
            version: CHECKPOINT_VERSION,
            dims,
            params: ModelParams::init(dims, cfg.seed),
            adam: AdamState::new(dims),
            epoch: 0,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            loss_history: Vec::new(),
            vocab: ds.vocab.clone(),
            amount_stats: ds.amount_stats,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self)?;
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&json)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_slice(&bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_slice(bytes)
            .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        if probe.version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: probe.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let cp: Checkpoint =
            serde_json::from_slice(bytes).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
        cp.validate()?;
        Ok(cp)
    }

    fn validate(&self) -> Result<()> {
        if self.params.dims != self.dims || self.adam.m.dims != self.dims || self.adam.v.dims != self.dims {
            return Err(Error::Checkpoint("tensor dims disagree with header".into()));
        }
        self.params.check_shapes()?;
        self.adam.m.check_shapes()?;
        self.adam.v.check_shapes()?;
        if self.vocab.size() != self.dims.vocab {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} entries but the embedding table has {} rows",
                self.vocab.size(),
                self.dims.vocab
            )));
        }
        if self.loss_history.len() != self.epoch {
            return Err(Error::Checkpoint("loss history length differs from epoch counter".into()));
        }
        Ok(())
    }

    /// Errors unless `ds` was encoded with this checkpoint's vocabulary and
    /// amount normalization.
    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        if ds.vocab != self.vocab {
            return Err(Error::VocabMismatch(format!(
                "dataset has {} codes, checkpoint has {}",
                ds.vocab.codes().len(),
                self.vocab.codes().len()
            )));
        }
        if ds.amount_stats != self.amount_stats {
            return Err(Error::VocabMismatch(format!(
                "amount normalization differs: dataset {:?}, checkpoint {:?}",
                ds.amount_stats, self.amount_stats
            )));
        }
        Ok(())
    }
}
