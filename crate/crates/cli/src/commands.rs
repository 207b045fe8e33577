use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use log::info;
use serde::Serialize;

use evseq::data::{
    load_csv, normalize_amounts, read_vocab, synthesize_dataset, write_csv, write_vocab, CsvSchema, LoadOptions,
    SplitRatios, Splits,
};
use evseq::evaluation::{evaluate, extract_embeddings, Report};
use evseq::experiment::{mean_ranks, prepare_splits, run_cell, summarize, sweep_variants, RankRow, SweepRow};
use evseq::gradcheck::{gradcheck as run_gradcheck, GradCheckOptions};
use evseq::training::{resume_with, train_with, EpochRecord, TrainOptions};
use evseq::{Checkpoint, Dataset, Error, Method};

use crate::config::{ConfigError, RunConfig};

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Context {
    fn path(&self, command: &str, hash: &str, ext: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(format!("{command}_{hash}.{ext}")))
    }

    fn dataset(&self) -> Result<Dataset> {
        let d = &self.cfg.data;
        if let Some(spec) = &d.synth_spec {
            return Ok(synthesize_dataset(spec, d.seed)?.dataset);
        }
        let csv = d.csv_path.as_ref().expect("validated: csv_path or synth_spec");
        let vocab = d.vocab_path.as_deref().map(read_vocab).transpose()?;
        let opts = LoadOptions {
            labels: d.labels_path.clone(),
            vocab,
        };
        load_csv(csv, &CsvSchema::default(), &opts).with_context(|| format!("loading {}", csv.display()))
    }

    fn splits(&self) -> Result<Splits> {
        Ok(prepare_splits(&self.dataset()?, SplitRatios::default(), self.cfg.data.seed)?)
    }

    fn checkpoint(&self, explicit: Option<&Path>) -> Result<Checkpoint> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => self.path("train", &self.cfg.train_hash(), "json")?,
        };
        let cp = Checkpoint::load(&path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        let current = self.cfg.train_config().hash();
        if cp.config_hash != current {
            bail!(Error::ConfigMismatch {
                checkpoint: cp.config_hash,
                current,
            });
        }
        Ok(cp)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn synth(ctx: &Context) -> Result<()> {
    let d = &ctx.cfg.data;
    let Some(spec) = &d.synth_spec else {
        bail!(ConfigError("synth needs data.synth_spec".into()));
    };
    let corpus = synthesize_dataset(spec, d.seed)?;
    let h = ctx.cfg.data_hash();
    let events = ctx.path("synth", &h, "csv")?;
    let labels = ctx.path("synth", &h, "labels.csv")?;
    let vocab = ctx.path("synth", &h, "vocab.txt")?;
    write_csv(&corpus.dataset, &events, Some(&labels))?;
    write_vocab(&corpus.dataset.vocab, &vocab)?;
    info!(
        "wrote {} sequences ({} events) to {}",
        corpus.dataset.len(),
        corpus.dataset.num_events(),
        events.display()
    );
    Ok(())
}

pub fn train(ctx: &Context, resume: Option<&Path>, force: bool) -> Result<()> {
    let tc = ctx.cfg.train_config();
    let splits = ctx.splits()?;
    let h = ctx.cfg.train_hash();
    let cp_path = ctx.path("train", &h, "json")?;
    let log_path = ctx.path("train", &h, "ndjson")?;
    let mut log = BufWriter::new(File::create(&log_path)?);
    let mut log_err = None;
    let mut on_epoch = |r: &EpochRecord| {
        info!("epoch {} {} loss {:.6} ({} ms)", r.epoch, r.method, r.loss, r.wall_ms);
        let line = serde_json::to_string(r).expect("record serializes");
        if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
            log_err.get_or_insert(e);
        }
    };
    let result = match resume {
        Some(p) => {
            let cp = Checkpoint::load(p).with_context(|| format!("loading checkpoint {}", p.display()))?;
            resume_with::<f64>(cp, &tc, &splits.train, TrainOptions { force }, &mut on_epoch)
        }
        None => train_with::<f64>(&tc, &splits.train, &mut on_epoch),
    };
    if let Some(e) = log_err {
        return Err(e).context(format!("writing {}", log_path.display()));
    }
    let cp = match result {
        Ok(cp) => cp,
        Err(Error::Diverged {
            epoch,
            step,
            reason,
            checkpoint,
        }) => {
            let p = ctx.path("train", &h, "diverged.json")?;
            checkpoint.save(&p)?;
            bail!(
                "training diverged at epoch {epoch}, step {step} ({reason}); last finite state saved to {}",
                p.display()
            );
        }
        Err(e) => return Err(e.into()),
    };
    cp.save(&cp_path)?;
    info!("checkpoint {} (config hash {})", cp_path.display(), cp.config_hash);
    Ok(())
}

pub fn eval(ctx: &Context, checkpoint: Option<&Path>) -> Result<()> {
    let cp = ctx.checkpoint(checkpoint)?;
    let splits = ctx.splits()?;
    let report = evaluate(&cp, &splits, ctx.cfg.eval_options(ctx.cfg.train.seed))?;
    let path = ctx.path("eval", &ctx.cfg.full_hash(), "json")?;
    write_json(&path, &report)?;
    println!(
        "{} global_auc {:.4} local_auc {:.4} -> {}",
        report.method,
        report.global_auc,
        report.local_auc,
        path.display()
    );
    Ok(())
}

pub fn embed(ctx: &Context, checkpoint: Option<&Path>) -> Result<()> {
    let cp = ctx.checkpoint(checkpoint)?;
    let ds = normalize_amounts(ctx.dataset()?, cp.amount_stats)?;
    let table = extract_embeddings(&cp, &ds)?;
    let path = ctx.path("embed", &ctx.cfg.train_hash(), "csv")?;
    table.write_csv(&path)?;
    info!("wrote {} embeddings to {}", table.len(), path.display());
    Ok(())
}

pub fn gradcheck(ctx: &Context) -> Result<()> {
    let opts = GradCheckOptions::default();
    let report = run_gradcheck(&Method::ALL, &opts)?;
    let path = ctx.path("gradcheck", &ctx.cfg.full_hash(), "json")?;
    write_json(&path, &report)?;
    for m in Method::ALL {
        let worst = report
            .cases
            .iter()
            .filter(|c| c.method == m)
            .map(|c| c.max_rel_err)
            .fold(0.0, f64::max);
        println!("{m:>12}: max relative error {worst:.3e}");
    }
    println!("max relative error {:.3e} (tolerance {:.0e})", report.max_rel_err, report.tolerance);
    if !report.passed() {
        bail!("gradient check failed");
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    config_hash: String,
    rows: &'a [SweepRow],
    ranks: &'a [RankRow],
    cells: &'a [Report],
}

pub fn sweep(ctx: &Context) -> Result<()> {
    let splits = ctx.splits()?;
    let base = ctx.cfg.train_config();
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for variant in sweep_variants(&ctx.cfg.eval.lambdas) {
        let mut reports = Vec::new();
        for &seed in &ctx.cfg.eval.seeds {
            let tc = evseq::TrainConfig {
                seed,
                ..variant.apply(&base)
            };
            info!("{} seed {seed}", variant.label());
            let (_, report) = run_cell(&tc, &splits, ctx.cfg.eval_options(seed), &mut |r| {
                info!("  epoch {} loss {:.6}", r.epoch, r.loss)
            })?;
            reports.push(report);
        }
        rows.extend(summarize(variant, &reports));
        cells.extend(reports);
    }
    let ranks = mean_ranks(&rows);
    let h = ctx.cfg.full_hash();

    let table = ctx.path("sweep", &h, "csv")?;
    let mut w = csv::Writer::from_path(&table)?;
    w.write_record([
        "variant",
        "seeds",
        "global_auc_mean",
        "global_auc_std",
        "local_auc_mean",
        "local_auc_std",
        "global_rank",
        "local_rank",
        "mean_rank",
    ])?;
    println!("{:<22} {:>17} {:>17} {:>9}", "variant", "global AUC", "local AUC", "mean rank");
    for (r, k) in rows.iter().zip(&ranks) {
        w.write_record([
            r.variant.clone(),
            r.seeds.to_string(),
            r.global_auc.mean.to_string(),
            r.global_auc.std.to_string(),
            r.local_auc.mean.to_string(),
            r.local_auc.std.to_string(),
            k.global_rank.to_string(),
            k.local_rank.to_string(),
            k.mean_rank.to_string(),
        ])?;
        println!(
            "{:<22} {:>17} {:>17} {:>9.2}",
            r.variant,
            r.global_auc.to_string(),
            r.local_auc.to_string(),
            k.mean_rank
        );
    }
    w.flush()?;
    write_json(
        &ctx.path("sweep", &h, "json")?,
        &SweepOutput {
            config_hash: h.clone(),
            rows: &rows,
            ranks: &ranks,
            cells: &cells,
        },
    )?;
    info!("sweep table {}", table.display());
    Ok(())
}
