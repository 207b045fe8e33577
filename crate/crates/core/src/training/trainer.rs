use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::data::{make_batches, Dataset};
use crate::encoder::ModelParams;
use crate::rng::{derive_seed, Stream};
use crate::scalar::Scalar;
use crate::training::{batch_is_usable, clip_global_norm, compute_gradients, Adam, AdamState, Checkpoint, TrainConfig};
use crate::{Error, Result};

/// One line of the per-epoch NDJSON log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub method: String,
    pub loss: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TrainOptions {
    /// Resume even when the checkpoint was produced by a different config.
    pub force: bool,
}

/// Step seed for `(epoch, step)`; together with the epoch shuffle seed this is
/// the whole random state of a run.
pub fn step_seed(seed: u64, epoch: usize, step: usize) -> u64 {
    derive_seed(seed, Stream::Step, &[epoch as u64, step as u64])
}

pub fn shuffle_seed(seed: u64, epoch: usize) -> u64 {
    derive_seed(seed, Stream::Shuffle, &[epoch as u64])
}

/// Trains in `f64` from a fresh initialization.
pub fn train(cfg: &TrainConfig, ds: &Dataset) -> Result<Checkpoint> {
    train_with::<f64>(cfg, ds, &mut |_| {})
}

pub fn train_with<T: Scalar>(
    cfg: &TrainConfig,
    ds: &Dataset,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<Checkpoint> {
    cfg.validate()?;
    ds.check_invariants()?;
    let cp = Checkpoint::initial(cfg, ds)?;
    run::<T>(cp, cfg, ds, on_epoch)
}

/// Continues `cp` until `cfg.epochs` epochs are complete.
pub fn resume_with<T: Scalar>(
    cp: Checkpoint,
    cfg: &TrainConfig,
    ds: &Dataset,
    opts: TrainOptions,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<Checkpoint> {
    cfg.validate()?;
    let current = cfg.hash();
    if cp.config_hash != current {
        warn!("checkpoint config hash {} differs from current {current}", cp.config_hash);
        if !opts.force {
            return Err(Error::ConfigMismatch {
                checkpoint: cp.config_hash,
                current,
            });
        }
    }
    cp.check_dataset(ds)?;
    ds.check_invariants()?;
    if cp.dims.k != cfg.k || cp.dims.hidden != cfg.hidden {
        return Err(Error::config(format!(
            "checkpoint dims (k={}, hidden={}) differ from config (k={}, hidden={})",
            cp.dims.k, cp.dims.hidden, cfg.k, cfg.hidden
        )));
    }
    run::<T>(cp, cfg, ds, on_epoch)
}

fn run<T: Scalar>(
    mut cp: Checkpoint,
    cfg: &TrainConfig,
    ds: &Dataset,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<Checkpoint> {
    let adam = Adam {
        lr: cfg.lr,
        beta1: cfg.adam_betas.0,
        beta2: cfg.adam_betas.1,
        eps: cfg.adam_eps,
    };
    let mut params: ModelParams<T> = cp.params.cast();
    let mut state: AdamState<T> = cp.adam.cast();
    cp.config_hash = cfg.hash();
    cp.config = cfg.clone();

    while cp.epoch < cfg.epochs {
        let epoch = cp.epoch;
        let started = Instant::now();
        let mut total = 0.0;
        let mut steps = 0usize;
        for (step, batch) in make_batches(ds, cfg.batch_size, shuffle_seed(cfg.seed, epoch), true)?.enumerate() {
            if !batch_is_usable(&batch, cfg.method) {
                debug!("epoch {epoch} step {step}: skipping degenerate batch of {}", batch.len());
                continue;
            }
            let diverged = |reason: String, params: &ModelParams<T>, state: &AdamState<T>, cp: &Checkpoint| {
                let mut last = cp.clone();
                last.params = params.cast();
                last.adam = state.cast();
                Error::Diverged {
                    epoch,
                    step,
                    reason,
                    checkpoint: Box::new(last),
                }
            };
            let mut out = match compute_gradients(&params, &batch, cfg, step_seed(cfg.seed, epoch, step)) {
                Ok(out) => out,
                Err(Error::NonFinite(what)) => return Err(diverged(what, &params, &state, &cp)),
                Err(e) => return Err(e),
            };
            if !out.grads.is_finite() {
                return Err(diverged("non-finite gradient".into(), &params, &state, &cp));
            }
            if let Some(c) = cfg.grad_clip {
                clip_global_norm(&mut out.grads, c);
            }
            adam.step(&mut params, &out.grads, &mut state);
            total += out.loss.as_f64();
            steps += 1;
        }
        if steps == 0 {
            return Err(Error::invalid(format!(
                "epoch {epoch} had no usable batch for method {}",
                cfg.method
            )));
        }
        let loss = total / steps as f64;
        cp.epoch += 1;
        cp.loss_history.push(loss);
        cp.params = params.cast();
        cp.adam = state.cast();
        on_epoch(&EpochRecord {
            epoch,
            method: cfg.method.to_string(),
            loss,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }
    Ok(cp)
}
