use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::hex;
use crate::objectives::ViewLenRange;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Contrastive loss over subsequence views.
    Coles,
    /// Masked-latent InfoNCE loss.
    Cmlm,
    /// Contrastive loss on views with masked events.
    ColesMasked,
    /// `coles + lambda * cmlm`.
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Coles, Method::Cmlm, Method::ColesMasked, Method::Hybrid];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Coles => "coles",
            Method::Cmlm => "cmlm",
            Method::ColesMasked => "coles_masked",
            Method::Hybrid => "hybrid",
        }
    }

    pub fn uses_views(&self) -> bool {
        !matches!(self, Method::Cmlm)
    }

    pub fn uses_masked_prediction(&self) -> bool {
        matches!(self, Method::Cmlm | Method::Hybrid)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

/// Per-dataset encoder size and epoch count used for the public
/// transaction benchmarks; the embedding width is 24 throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Churn,
    Gender,
    Age,
    DataFusion,
}

impl Preset {
    /// `(vocab size, hidden size, epochs)`.
    pub fn sizes(&self) -> (usize, usize, usize) {
        match self {
            Preset::Churn => (344, 512, 50),
            Preset::Gender => (184, 128, 100),
            Preset::Age => (202, 512, 50),
            Preset::DataFusion => (323, 64, 50),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub lambda: f64,
    pub rho: f64,
    pub mask_rate: f64,
    pub n_views: usize,
    pub n_neg: usize,
    pub n_hard: usize,
    pub view_len_range: ViewLenRange,
    pub k: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Hybrid,
            lambda: 0.05,
            rho: 0.5,
            mask_rate: 0.15,
            n_views: 5,
            n_neg: 16,
            n_hard: 5,
            view_len_range: ViewLenRange::default(),
            k: 24,
            hidden: 64,
            batch_size: 64,
            epochs: 50,
            lr: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            grad_clip: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_preset(mut self, preset: Preset) -> Self {
        let (_, hidden, epochs) = preset.sizes();
        self.k = 24;
        self.hidden = hidden;
        self.epochs = epochs;
        self
    }

    /// Weight of the masked-prediction term for this method.
    pub fn cmlm_weight(&self) -> f64 {
        match self.method {
            Method::Cmlm => 1.0,
            Method::Hybrid => self.lambda,
            Method::Coles | Method::ColesMasked => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if self.method == Method::Hybrid && self.lambda <= 0.0 {
            return Err(Error::config("hybrid method requires lambda > 0"));
        }
        positive("rho", self.rho)?;
        positive("lr", self.lr)?;
        positive("adam_eps", self.adam_eps)?;
        if !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return Err(Error::config(format!("mask_rate must lie in (0, 1), got {}", self.mask_rate)));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::config("adam betas must lie in [0, 1)"));
        }
        if let Some(c) = self.grad_clip {
            positive("grad_clip", c)?;
        }
        for (name, v) in [
            ("n_neg", self.n_neg),
            ("n_hard", self.n_hard),
            ("k", self.k),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.n_views < 2 {
            return Err(Error::config("n_views must be at least 2"));
        }
        self.view_len_range.validate()
    }

    /// Identity of the run for checkpoint compatibility: SHA-256 (first 16
    /// hex digits) of the config with `epochs` cleared, so a run can be
    /// extended without changing its hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.epochs = 0;
        short_hash(&serde_json::to_vec(&c).expect("config serializes"))
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))[..16].to_string()
}
