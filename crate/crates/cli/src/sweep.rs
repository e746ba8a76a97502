//! Ablation sweeps: one full pretrain + linear probe per setting.

use std::io::Write;

use smae_core::nn::checkpoint::write_container;
use smae_core::{embed_corpus, linear_probe_cv, pretrain, CVReport, Error, GraphCorpus, ModelConfig, ProbeSettings, Result, Strategy};

use crate::manifest::sha256_hex;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// The swept value as written to the CSV key column.
    pub key: String,
    pub report: CVReport,
    pub loss_log: Vec<f64>,
    /// SHA-256 of the serialized checkpoint, config included.
    pub checkpoint_sha256: String,
    /// SHA-256 of the trained parameters alone, so runs under differently
    /// spelled but equivalent configs can be compared.
    pub params_sha256: String,
}

fn run_one(corpus: &GraphCorpus, cfg: &ModelConfig, key: String, seed: u64) -> Result<SweepRow> {
    let ckpt = pretrain(corpus, cfg)?;
    let mut params = Vec::new();
    write_container(&ckpt.store, serde_json::Value::Null, &mut params)?;
    let emb = embed_corpus(&ckpt, corpus, false)?;
    let report = linear_probe_cv(&emb, &ProbeSettings::default(), seed)?;
    Ok(SweepRow {
        key,
        report,
        checkpoint_sha256: sha256_hex(&ckpt.to_bytes()?),
        params_sha256: sha256_hex(&params),
        loss_log: ckpt.loss_log,
    })
}

/// One row per `β`, everything else from `base`, with `seed` used for both
/// pretraining and the probe. `β = 0` is the random-masking baseline.
pub fn sweep_beta(corpus: &GraphCorpus, base: &ModelConfig, betas: &[f64], seed: u64) -> Result<Vec<SweepRow>> {
    if betas.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one beta".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(Error::InvalidArgument(format!("beta must be >= 0, got {b}")));
    }
    betas
        .iter()
        .map(|&beta| {
            let mut cfg = base.clone();
            cfg.schedule.beta = beta;
            cfg.seed = seed;
            log::info!("sweep: beta = {beta}");
            run_one(corpus, &cfg, beta.to_string(), seed)
        })
        .collect()
}

/// One row per masking strategy.
pub fn sweep_strategy(corpus: &GraphCorpus, base: &ModelConfig, strategies: &[Strategy], seed: u64) -> Result<Vec<SweepRow>> {
    if strategies.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one strategy".into()));
    }
    strategies
        .iter()
        .map(|&s| {
            let mut cfg = base.clone();
            cfg.schedule.strategy = s;
            cfg.seed = seed;
            log::info!("sweep: strategy = {}", s.as_str());
            run_one(corpus, &cfg, s.as_str().to_string(), seed)
        })
        .collect()
}

/// `<key_header>,mean_acc,std` followed by one line per row.
pub fn write_csv(key_header: &str, rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([key_header, "mean_acc", "std"]).map_err(io)?;
    for r in rows {
        w.write_record([r.key.clone(), r.report.mean_accuracy.to_string(), r.report.std_accuracy.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
