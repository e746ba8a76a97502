use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use smae_core::{Metric, Strategy, Variant};

#[derive(Debug, Parser)]
#[command(name = "smae", version, about = "Structure-guided masked graph autoencoder pretraining and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pretrain a model and write a checkpoint.
    Pretrain(PretrainArgs),
    /// Per-node structural scores for every graph.
    Score(ScoreArgs),
    /// Show the mask sets the curriculum would pick at one epoch.
    MaskPreview(MaskPreviewArgs),
    /// Graph embeddings from a trained checkpoint.
    Embed(EmbedArgs),
    /// Cross-validated linear probe on embeddings.
    Evaluate(EvaluateArgs),
    /// Cosine nearest neighbors of one embedding.
    Retrieve(RetrieveArgs),
    /// Pretrain + evaluate across values of beta or masking strategies.
    Sweep(SweepArgs),
    /// Finite-difference check of the end-to-end training gradients.
    Gradcheck(GradcheckArgs),
    /// Oracle, gradient and schedule checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus file, one JSON graph per line.
    #[arg(long, conflicts_with = "synthetic")]
    pub corpus: Option<PathBuf>,
    /// Use the built-in planted-motif corpus generated from this seed.
    #[arg(long, value_name = "SEED")]
    pub synthetic: Option<u64>,
    /// raw | label_onehot | degree_onehot[:D_MAX]
    #[arg(long)]
    pub featurization: Option<String>,
}

impl CorpusArgs {
    pub fn given(&self) -> bool {
        self.corpus.is_some() || self.synthetic.is_some() || self.featurization.is_some()
    }
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON model config; missing keys take defaults, unknown keys are errors.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named dataset preset (imdb-b, imdb-m, proteins, collab, mutag, reddit-b, nci1).
    #[arg(long)]
    pub preset: Option<String>,
    /// Model variant: P (fixed centrality) or L (learned scorer).
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

impl ConfigArgs {
    pub fn given(&self) -> bool {
        self.config.is_some() || self.preset.is_some() || self.variant.is_some() || self.seed.is_some() || self.epochs.is_some()
    }
}

pub fn parse_variant(s: &str) -> Result<Variant, String> {
    match s {
        "p" | "P" => Ok(Variant::P),
        "l" | "L" => Ok(Variant::L),
        _ => Err(format!("unknown variant '{s}' (expected P or L)")),
    }
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Checkpoint path; the run manifest is written beside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-run the pretraining recorded in a manifest and verify the checkpoint digest.
    #[arg(long, value_name = "MANIFEST")]
    pub replay: Option<PathBuf>,
    /// Write the fully resolved config to this file and exit without training.
    #[arg(long, value_name = "FILE")]
    pub emit_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub metric: Metric,
    /// Variant-L checkpoint, required for the learnable metric.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaskPreviewArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "pagerank")]
    pub metric: Metric,
    /// Epoch t in 0..=T.
    #[arg(long)]
    pub epoch: usize,
    /// Total epochs T.
    #[arg(long = "of")]
    pub of: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub warmup: f64,
    #[arg(long, default_value = "easy_to_hard")]
    pub strategy: Strategy,
    /// Drop the uniform noise term from the priorities.
    #[arg(long)]
    pub no_noise: bool,
    /// Write the JSON lines here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Apply learned score modulation at inference (variant L only).
    #[arg(long)]
    pub modulate: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub query: usize,
    #[arg(long)]
    pub k: usize,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("axis").required(true).args(["betas", "strategies"])))]
pub struct SweepArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Comma-separated values of beta.
    #[arg(long, value_delimiter = ',')]
    pub betas: Vec<f64>,
    /// Comma-separated masking strategies.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Vec<Strategy>,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Graphs per (variant, layer type) combination.
    #[arg(long, default_value_t = 5)]
    pub graphs: usize,
    #[arg(long, default_value_t = 8)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
