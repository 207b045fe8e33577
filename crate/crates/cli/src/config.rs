use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use evseq::data::SynthSpec;
use evseq::evaluation::{EvalOptions, FitOptions, ProbeOptions};
use evseq::experiment::SWEEP_LAMBDAS;
use evseq::objectives::ViewLenRange;
use evseq::training::short_hash;
use evseq::{Method, TrainConfig};

/// Published JSON Schema of [`RunConfig`].
pub const SCHEMA: &str = include_str!("../config.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub csv_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    pub vocab_path: Option<PathBuf>,
    pub synth_spec: Option<SynthSpec>,
    /// Seeds synthesis and the train/val/test split.
    pub seed: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            csv_path: None,
            labels_path: None,
            vocab_path: None,
            synth_spec: Some(SynthSpec::default()),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub k: usize,
    pub hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            k: t.k,
            hidden: t.hidden,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveSection {
    pub method: Method,
    pub lambda: f64,
    pub rho: f64,
    pub mask_rate: f64,
    pub n_views: usize,
    pub n_neg: usize,
    pub n_hard: usize,
    pub view_len_range: ViewLenRange,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            method: t.method,
            lambda: t.lambda,
            rho: t.rho,
            mask_rate: t.mask_rate,
            n_views: t.n_views,
            n_neg: t.n_neg,
            n_hard: t.n_hard,
            view_len_range: t.view_len_range,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub grad_clip: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            seed: t.seed,
            adam_betas: t.adam_betas,
            adam_eps: t.adam_eps,
            grad_clip: t.grad_clip,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub probe_epochs: usize,
    pub probe_lr: f64,
    pub probe_fit_fraction: f64,
    pub classifier_epochs: usize,
    pub classifier_lr: f64,
    /// Training seeds of the multi-seed harness (`sweep`).
    pub seeds: Vec<u64>,
    /// Hybrid weights swept by `sweep`.
    pub lambdas: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EvalOptions::with_seed(0);
        Self {
            probe_epochs: e.probe.epochs,
            probe_lr: e.probe.lr,
            probe_fit_fraction: e.probe.fit_fraction,
            classifier_epochs: e.classifier.epochs,
            classifier_lr: e.classifier.lr,
            seeds: (0..5).collect(),
            lambdas: SWEEP_LAMBDAS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub objective: ObjectiveSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

/// A config problem: reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Sets `path` (dot-separated) in `root`. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(config_err(format!("override key `{path}` has an empty segment")));
        }
        let obj = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just set")
            }
            _ => {
                return Err(config_err(format!(
                    "override `{path}`: `{}` is not a section",
                    keys[..i].join(".")
                )))
            }
        };
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one segment")
}

impl RunConfig {
    /// Reads `path` (or the defaults), applies overrides, then parses
    /// strictly and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut root = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(root).map_err(|e| {
            let at = e.path().to_string();
            config_err(format!("{at}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.data.csv_path, &self.data.synth_spec) {
            (Some(_), Some(_)) => {
                return Err(config_err("data: set exactly one of csv_path and synth_spec"));
            }
            (None, None) => return Err(config_err("data: one of csv_path or synth_spec is required")),
            (None, Some(spec)) => spec.validate().map_err(|e| config_err(format!("data.synth_spec: {e}")))?,
            (Some(_), None) => {}
        }
        self.train_config()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        let e = &self.eval;
        if e.seeds.is_empty() {
            return Err(config_err("eval.seeds must not be empty"));
        }
        if !(e.probe_lr > 0.0 && e.classifier_lr > 0.0) {
            return Err(config_err("eval learning rates must be positive"));
        }
        if !(e.probe_fit_fraction > 0.0 && e.probe_fit_fraction < 1.0) {
            return Err(config_err("eval.probe_fit_fraction must lie in (0, 1)"));
        }
        if e.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(config_err("eval.lambdas must be positive"));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let (o, t) = (&self.objective, &self.train);
        TrainConfig {
            method: o.method,
            lambda: o.lambda,
            rho: o.rho,
            mask_rate: o.mask_rate,
            n_views: o.n_views,
            n_neg: o.n_neg,
            n_hard: o.n_hard,
            view_len_range: o.view_len_range,
            k: self.model.k,
            hidden: self.model.hidden,
            batch_size: t.batch_size,
            epochs: t.epochs,
            lr: t.lr,
            adam_betas: t.adam_betas,
            adam_eps: t.adam_eps,
            grad_clip: t.grad_clip,
            seed: t.seed,
        }
    }

    pub fn eval_options(&self, seed: u64) -> EvalOptions {
        let e = &self.eval;
        EvalOptions {
            classifier: FitOptions {
                epochs: e.classifier_epochs,
                lr: e.classifier_lr,
                seed,
            },
            probe: ProbeOptions {
                epochs: e.probe_epochs,
                lr: e.probe_lr,
                seed,
                fit_fraction: e.probe_fit_fraction,
            },
        }
    }

    /// Hash of the data section only.
    pub fn data_hash(&self) -> String {
        short_hash(&serde_json::to_vec(&self.data).expect("serializable"))
    }

    /// Hash of everything that determines a trained checkpoint.
    pub fn train_hash(&self) -> String {
        let v = serde_json::json!([self.data, self.train_config()]);
        short_hash(&serde_json::to_vec(&v).expect("serializable"))
    }

    /// Hash of the whole config.
    pub fn full_hash(&self) -> String {
        short_hash(&serde_json::to_vec(self).expect("serializable"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::load(None, &[]).unwrap();
    }

    #[test]
    fn overrides_are_typed_and_strict() {
        let c = RunConfig::load(
            None,
            &["objective.lambda=0.1".into(), "objective.method=cmlm".into(), "model.k=4".into()],
        )
        .unwrap();
        assert_eq!(c.objective.lambda, 0.1);
        assert_eq!(c.objective.method, Method::Cmlm);
        assert_eq!(c.model.k, 4);

        let err = RunConfig::load(None, &["objective.lamda=0.1".into()]).unwrap_err();
        assert!(err.0.contains("objective") && err.0.contains("lamda"), "{err}");
        let err = RunConfig::load(None, &["train.epochs=-1".into()]).unwrap_err();
        assert!(err.0.starts_with("train.epochs"), "{err}");
        assert!(RunConfig::load(None, &["objective.method=hybrid".into(), "objective.lambda=0".into()]).is_err());
        assert!(RunConfig::load(None, &["nokey".into()]).is_err());
    }

    #[test]
    fn schema_lists_every_key() {
        let schema: Value = serde_json::from_str(SCHEMA).unwrap();
        let defaults = serde_json::to_value(RunConfig::default()).unwrap();
        for (section, body) in defaults.as_object().unwrap() {
            let props = &schema["properties"][section]["properties"];
            assert!(props.is_object(), "schema lacks section {section}");
            for key in body.as_object().unwrap().keys() {
                assert!(props.get(key).is_some(), "schema lacks {section}.{key}");
            }
            assert_eq!(schema["properties"][section]["additionalProperties"], Value::Bool(false));
        }
    }

    #[test]
    fn hashes_track_relevant_sections() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.eval.probe_epochs += 1;
        assert_eq!(a.train_hash(), b.train_hash());
        assert_ne!(a.full_hash(), b.full_hash());
        b.train.lr *= 2.0;
        assert_ne!(a.train_hash(), b.train_hash());
        assert_eq!(a.data_hash(), b.data_hash());
    }
}
