//! The `smae` command line: configuration, presets, run manifests, sweeps
//! and the built-in checks.
//!
//! [`run_command`] is the whole program minus process setup, so tests can
//! drive it in-process. Exit statuses: 0 success, 1 usage error, 2 data
//! error, 3 numeric failure.

mod args;
pub mod checks;
pub mod manifest;
pub mod presets;
pub mod sweep;

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};
use smae_core::graph::{generate_synthetic_corpus, SynthSpec};
use smae_core::masking::plan_mask;
use smae_core::scoring::{predefined_scores, score_graph};
use smae_core::{
    embed_corpus, linear_probe_cv, load_corpus, nearest_neighbors, pretrain, EmbeddingMatrix, Featurization, GraphCorpus, MaskSchedule,
    Metric, ModelCheckpoint, ModelConfig, ProbeSettings, Variant,
};

use args::{Cli, Command, ConfigArgs, CorpusArgs};
use manifest::{manifest_path, sha256_hex, CorpusSource, FileDigest, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Config keys a preset owns; a `--config` file alongside `--preset` may
/// tune anything else.
const ARCHITECTURE_KEYS: [&str; 3] = ["variant", "encoder", "decoder"];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<smae_core::Error> for CliError {
    fn from(e: smae_core::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// Parses `argv` (program name first) and runs the subcommand, returning
/// the process exit status. Errors are reported on stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("smae: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Score(a) => cmd_score(a),
        Command::MaskPreview(a) => cmd_mask_preview(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Selftest(a) => cmd_selftest(a),
    }
}

fn merge_json(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Preset (if any), then the config file, then `--variant`, `--seed` and
/// `--epochs`. Returns the validated config and the preset's featurization.
pub fn resolve_config(
    preset: Option<&str>,
    config_file: Option<&Path>,
    variant: Option<Variant>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> CliResult<(ModelConfig, Option<Featurization>)> {
    let (mut cfg, featurization) = match preset {
        Some(name) => {
            let p = presets::preset(name, variant.unwrap_or(Variant::P))
                .ok_or_else(|| CliError::Usage(format!("unknown preset '{name}' (known: {})", presets::NAMES.join(", "))))?;
            (p.config, Some(p.featurization))
        }
        None => (ModelConfig::default(), None),
    };
    if let Some(path) = config_file {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let overlay: Value = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let Value::Object(obj) = &overlay else {
            return Err(CliError::Data(format!("{}: config must be a JSON object", path.display())));
        };
        if preset.is_some() {
            if let Some(k) = ARCHITECTURE_KEYS.iter().find(|k| obj.contains_key(**k)) {
                return Err(CliError::Usage(format!("--config sets '{k}', which conflicts with --preset")));
            }
        }
        if let (Some(v), Some(file_v)) = (variant, obj.get("variant")) {
            if serde_json::to_value(v).ok().as_ref() != Some(file_v) {
                return Err(CliError::Usage("--variant conflicts with the variant in --config".into()));
            }
        }
        let mut base = serde_json::to_value(&cfg).expect("config serializes");
        merge_json(&mut base, overlay);
        cfg = serde_json::from_value(base).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    if let Some(v) = variant {
        cfg.variant = v;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = epochs {
        cfg.schedule.epochs = t;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((cfg, featurization))
}

fn config_from_args(a: &ConfigArgs) -> CliResult<(ModelConfig, Option<Featurization>)> {
    resolve_config(a.preset.as_deref(), a.config.as_deref(), a.variant, a.seed, a.epochs)
}

struct LoadedCorpus {
    corpus: GraphCorpus,
    source: CorpusSource,
    inputs: Vec<FileDigest>,
}

fn load_source(source: &CorpusSource) -> CliResult<GraphCorpus> {
    Ok(match source {
        CorpusSource::File { path, featurization } => load_corpus(path, *featurization)?,
        CorpusSource::Synthetic { spec, seed } => generate_synthetic_corpus(spec, *seed)?,
    })
}

/// The corpus named on the command line. Featurization: the flag, else
/// `default`, else raw.
fn corpus_from_args(a: &CorpusArgs, default: Option<Featurization>) -> CliResult<LoadedCorpus> {
    let source = match (&a.corpus, a.synthetic) {
        (Some(path), None) => {
            let featurization = match &a.featurization {
                Some(s) => Featurization::parse(s).map_err(|e| CliError::Usage(e.to_string()))?,
                None => default.unwrap_or(Featurization::Raw),
            };
            CorpusSource::File { path: path.clone(), featurization }
        }
        (None, Some(seed)) => {
            if a.featurization.is_some() {
                return Err(CliError::Usage("--featurization does not apply to --synthetic".into()));
            }
            CorpusSource::Synthetic { spec: SynthSpec::default(), seed }
        }
        _ => return Err(CliError::Usage("exactly one of --corpus or --synthetic is required".into())),
    };
    let inputs = match &source {
        CorpusSource::File { path, .. } => vec![FileDigest::of(path)?],
        CorpusSource::Synthetic { .. } => Vec::new(),
    };
    let corpus = load_source(&source)?;
    log::info!("corpus: {} graphs, feature width {}, {} classes", corpus.len(), corpus.feature_dim(), corpus.class_count());
    Ok(LoadedCorpus { corpus, source, inputs })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn finish_manifest(mut m: RunManifest, output: &Path, started: Instant) -> CliResult<()> {
    m.outputs.push(FileDigest::of(output)?);
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write(&manifest_path(output))
}

fn cmd_pretrain(a: args::PretrainArgs) -> CliResult<()> {
    if let Some(replay) = &a.replay {
        if a.config.given() || a.corpus.given() || a.emit_config.is_some() {
            return Err(CliError::Usage("--replay takes its config and corpus from the manifest".into()));
        }
        return replay_pretrain(replay, a.out.as_deref());
    }
    let (cfg, preset_feat) = config_from_args(&a.config)?;
    if let Some(path) = &a.emit_config {
        let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
        return fs::write(path, text + "\n").map_err(io_err(path));
    }
    let out = a.out.ok_or_else(|| CliError::Usage("pretrain needs --out".into()))?;
    let started = Instant::now();
    let loaded = corpus_from_args(&a.corpus, preset_feat)?;
    let ckpt = pretrain(&loaded.corpus, &cfg)?;
    ckpt.save(&out).map_err(CliError::from)?;

    let mut m = RunManifest::new("pretrain", cfg.seed);
    m.inputs = loaded.inputs;
    if let Some(path) = &a.config.config {
        m.inputs.push(FileDigest::of(path)?);
    }
    m.config = Some(cfg);
    m.corpus = Some(loaded.source);
    m.loss_log = ckpt.loss_log;
    finish_manifest(m, &out, started)
}

fn replay_pretrain(manifest: &Path, out: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let recorded = RunManifest::read(manifest)?;
    let (Some(cfg), Some(source)) = (recorded.config.clone(), recorded.corpus.clone()) else {
        return Err(CliError::Data(format!("{}: not a pretrain manifest", manifest.display())));
    };
    if recorded.command != "pretrain" {
        return Err(CliError::Data(format!("{}: recorded command is '{}', not pretrain", manifest.display(), recorded.command)));
    }
    for input in &recorded.inputs {
        let now = manifest::sha256_file(&input.path)?;
        if now != input.sha256 {
            return Err(CliError::Data(format!("{} changed since the recorded run", input.path.display())));
        }
    }
    let expected = recorded.outputs.first().ok_or_else(|| CliError::Data(format!("{}: no recorded output", manifest.display())))?;
    let out: PathBuf = out.map_or_else(|| expected.path.clone(), Path::to_path_buf);
    let corpus = load_source(&source)?;
    let ckpt = pretrain(&corpus, &cfg)?;
    let bytes = ckpt.to_bytes()?;
    fs::write(&out, &bytes).map_err(io_err(&out))?;
    let digest = sha256_hex(&bytes);
    if digest != expected.sha256 {
        return Err(CliError::Numeric(format!("replayed checkpoint digest {digest} differs from recorded {}", expected.sha256)));
    }
    log::info!("replay reproduced {} byte-for-byte", expected.path.display());
    let mut m = RunManifest::new("pretrain", cfg.seed);
    m.inputs = recorded.inputs;
    m.config = Some(cfg);
    m.corpus = Some(source);
    m.loss_log = ckpt.loss_log;
    finish_manifest(m, &out, started)
}

fn cmd_score(a: args::ScoreArgs) -> CliResult<()> {
    let started = Instant::now();
    let model = match (&a.model, a.metric) {
        (Some(path), Metric::Learnable) => {
            let ckpt = ModelCheckpoint::load(path)?;
            if ckpt.config.variant != Variant::L {
                return Err(CliError::Usage("the learnable metric needs a variant-L checkpoint".into()));
            }
            Some(ckpt)
        }
        (None, Metric::Learnable) => return Err(CliError::Usage("--metric learnable needs --model".into())),
        (Some(_), _) => return Err(CliError::Usage("--model only applies to --metric learnable".into())),
        (None, _) => None,
    };
    // Predefined metrics look at structure only, so any featurization will do.
    let default_feat = match &model {
        Some(ckpt) => ckpt.featurization.map(|f| f.featurization),
        None => Some(Featurization::degree_default()),
    };
    let loaded = corpus_from_args(&a.corpus, default_feat)?;
    let mut w = create(&a.out)?;
    for (i, g) in loaded.corpus.graphs().iter().enumerate() {
        let s = match &model {
            Some(ckpt) => score_graph(&ckpt.store, &ckpt.config.scorer, g)?,
            None => predefined_scores(g, a.metric)?,
        };
        let line = json!({"i": i, "metric": a.metric.as_str(), "values": s.values()});
        writeln!(w, "{line}").map_err(io_err(&a.out))?;
    }
    w.flush().map_err(io_err(&a.out))?;
    let mut m = RunManifest::new("score", 0);
    m.inputs = loaded.inputs;
    if let Some(path) = &a.model {
        m.inputs.push(FileDigest::of(path)?);
    }
    m.corpus = Some(loaded.source);
    finish_manifest(m, &a.out, started)
}

fn cmd_mask_preview(a: args::MaskPreviewArgs) -> CliResult<()> {
    let started = Instant::now();
    if a.metric == Metric::Learnable {
        return Err(CliError::Usage("mask-preview ranks by a predefined metric".into()));
    }
    let schedule = MaskSchedule { p: a.p, beta: a.beta, epochs: a.of, warmup_ratio: a.warmup, strategy: a.strategy, noise: !a.no_noise };
    schedule.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if a.epoch > a.of {
        return Err(CliError::Usage(format!("--epoch {} is past --of {}", a.epoch, a.of)));
    }
    let loaded = corpus_from_args(&a.corpus, Some(Featurization::degree_default()))?;
    let mut lines = Vec::new();
    for (i, g) in loaded.corpus.graphs().iter().enumerate() {
        if g.node_count() < 2 {
            log::warn!("mask-preview: graph {i} has fewer than 2 nodes, skipped");
            continue;
        }
        let scores = predefined_scores(g, a.metric)?;
        let plan = plan_mask(scores.values(), &schedule, a.epoch, a.seed, i as u64)?;
        lines.push(json!({"i": i, "n": g.node_count(), "k": plan.k_used, "masked": plan.masked, "informative": plan.informative_set}));
    }
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            for l in &lines {
                writeln!(w, "{l}").map_err(io_err(path))?;
            }
            w.flush().map_err(io_err(path))?;
            let mut m = RunManifest::new("mask-preview", a.seed);
            m.inputs = loaded.inputs;
            m.corpus = Some(loaded.source);
            finish_manifest(m, path, started)
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            for l in &lines {
                writeln!(w, "{l}").map_err(|e| CliError::Data(e.to_string()))?;
            }
            Ok(())
        }
    }
}

fn cmd_embed(a: args::EmbedArgs) -> CliResult<()> {
    let started = Instant::now();
    let ckpt = ModelCheckpoint::load(&a.model)?;
    if a.modulate && ckpt.config.variant != Variant::L {
        log::warn!("--modulate has no effect on a variant-P model");
    }
    let loaded = corpus_from_args(&a.corpus, ckpt.featurization.map(|f| f.featurization))?;
    let emb = embed_corpus(&ckpt, &loaded.corpus, a.modulate)?;
    let mut w = create(&a.out)?;
    emb.write_jsonl(&mut w)?;
    w.flush().map_err(io_err(&a.out))?;
    let mut m = RunManifest::new("embed", ckpt.config.seed);
    m.inputs = loaded.inputs;
    m.inputs.push(FileDigest::of(&a.model)?);
    m.config = Some(ckpt.config);
    m.corpus = Some(loaded.source);
    finish_manifest(m, &a.out, started)
}

fn read_embeddings(path: &Path) -> CliResult<EmbeddingMatrix> {
    let f = File::open(path).map_err(io_err(path))?;
    Ok(EmbeddingMatrix::read_jsonl(BufReader::new(f), path)?)
}

fn cmd_evaluate(a: args::EvaluateArgs) -> CliResult<()> {
    let started = Instant::now();
    let emb = read_embeddings(&a.emb)?;
    let settings = ProbeSettings { folds: a.folds, repeats: a.repeats, ..ProbeSettings::default() };
    let report = linear_probe_cv(&emb, &settings, a.seed)?;
    log::info!("accuracy {:.4} ± {:.4} over {} folds", report.mean_accuracy, report.std_accuracy, report.fold_accuracies.len());
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&a.report, text + "\n").map_err(io_err(&a.report))?;
    let mut m = RunManifest::new("evaluate", a.seed);
    m.inputs.push(FileDigest::of(&a.emb)?);
    finish_manifest(m, &a.report, started)
}

fn cmd_retrieve(a: args::RetrieveArgs) -> CliResult<()> {
    let emb = read_embeddings(&a.emb)?;
    let hits = nearest_neighbors(&emb, a.query, a.k).map_err(|e| CliError::Usage(e.to_string()))?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for (rank, (i, sim)) in hits.iter().enumerate() {
        writeln!(w, "{}", json!({"rank": rank + 1, "i": i, "similarity": sim})).map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}

fn cmd_sweep(a: args::SweepArgs) -> CliResult<()> {
    let started = Instant::now();
    let (cfg, preset_feat) = config_from_args(&a.config)?;
    let loaded = corpus_from_args(&a.corpus, preset_feat)?;
    let (header, rows) = if !a.betas.is_empty() {
        ("beta", sweep::sweep_beta(&loaded.corpus, &cfg, &a.betas, cfg.seed)?)
    } else {
        ("strategy", sweep::sweep_strategy(&loaded.corpus, &cfg, &a.strategies, cfg.seed)?)
    };
    let mut w = create(&a.out)?;
    sweep::write_csv(header, &rows, &mut w)?;
    w.flush().map_err(io_err(&a.out))?;
    let mut m = RunManifest::new("sweep", cfg.seed);
    m.inputs = loaded.inputs;
    m.config = Some(cfg);
    m.corpus = Some(loaded.source);
    finish_manifest(m, &a.out, started)
}

fn cmd_gradcheck(a: args::GradcheckArgs) -> CliResult<()> {
    if a.graphs == 0 || a.max_nodes < 3 {
        return Err(CliError::Usage("--graphs must be >= 1 and --max-nodes >= 3".into()));
    }
    let cases = checks::gradient_suite(a.graphs, a.max_nodes, a.seed)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let mut worst: f64 = 0.0;
    for c in &cases {
        worst = worst.max(c.report.max_rel_error);
        let line = json!({
            "variant": c.variant,
            "layer": c.layer,
            "nodes": c.nodes,
            "coordinates": c.report.checks.len(),
            "skipped_at_kinks": c.report.skipped_at_kinks,
            "max_rel_error": c.report.max_rel_error,
        });
        writeln!(w, "{line}").map_err(|e| CliError::Data(e.to_string()))?;
    }
    if worst >= checks::GRAD_TOLERANCE {
        return Err(CliError::Numeric(format!("max relative gradient error {worst:.3e} >= {:e}", checks::GRAD_TOLERANCE)));
    }
    Ok(())
}

fn cmd_selftest(a: args::SelftestArgs) -> CliResult<()> {
    let outcomes = checks::selftest(a.seed)?;
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        return Err(CliError::Numeric(format!("{failed} of {} self-checks failed", outcomes.len())));
    }
    Ok(())
}
