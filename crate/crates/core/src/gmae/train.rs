use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::model::{model_input, reconstruction_loss};
use super::{ModelCheckpoint, ModelConfig, Variant};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphCorpus};
use crate::masking::plan_mask;
use crate::nn::layers::BN_MOMENTUM;
use crate::nn::{AdamConfig, MessagePassing, ParamStore};
use crate::rng::{stream, Role};
use crate::scoring::{predefined_scores, Metric, SCORER_PREFIX};
use crate::tensor::Tape;

/// Several graphs merged into one disjoint graph so a single tape (and a
/// single batch-norm population) covers the whole batch.
pub struct Batch {
    /// Corpus indices of the member graphs.
    pub members: Vec<usize>,
    /// First node of each member in the merged graph.
    pub offsets: Vec<usize>,
    pub graph: Graph,
    pub mp: MessagePassing,
}

impl Batch {
    pub fn new(corpus: &GraphCorpus, members: Vec<usize>) -> Result<Self> {
        let parts: Vec<&Graph> = members.iter().map(|&i| &corpus.graphs()[i]).collect();
        let (graph, offsets) = Graph::disjoint_union(&parts)?;
        let mp = MessagePassing::new(&graph);
        Ok(Self { members, offsets, graph, mp })
    }

    /// Node range of member `k` in the merged graph.
    pub fn span(&self, k: usize) -> std::ops::Range<usize> {
        let end = self.offsets.get(k + 1).copied().unwrap_or(self.graph.node_count());
        self.offsets[k]..end
    }
}

/// What the trainer saw on one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
    pub masked_nodes: usize,
    /// L2 norm of the scorer gradient (0 for variant P).
    pub scorer_grad_norm: f64,
}

/// Pretrains a fresh model on `corpus`.
pub fn pretrain(corpus: &GraphCorpus, cfg: &ModelConfig) -> Result<ModelCheckpoint> {
    pretrain_with(corpus, cfg, |_| {})
}

/// [`pretrain`] with a callback after every optimizer step.
pub fn pretrain_with(corpus: &GraphCorpus, cfg: &ModelConfig, mut on_step: impl FnMut(&StepInfo)) -> Result<ModelCheckpoint> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot pretrain on an empty corpus".into()));
    }
    let trainable: Vec<usize> = (0..corpus.len()).filter(|&i| corpus.graphs()[i].node_count() >= 2).collect();
    if trainable.len() < corpus.len() {
        log::warn!("skipping {} graphs with fewer than 2 nodes; they cannot be masked", corpus.len() - trainable.len());
    }
    if trainable.is_empty() {
        return Err(Error::InvalidArgument("no graph has the 2 nodes masking needs".into()));
    }
    let mut store = super::model::init_model(cfg, corpus.feature_dim())?;

    let cached_scores = match cfg.variant {
        Variant::P => score_cache(corpus, cfg.scorer_metric)?,
        Variant::L => Vec::new(),
    };

    let adam = AdamConfig::new(cfg.lr, cfg.weight_decay);
    let mut loss_log = Vec::with_capacity(cfg.epochs());
    for epoch in 1..=cfg.epochs() {
        let mut order = trainable.clone();
        order.shuffle(&mut stream(cfg.seed, Role::Shuffle, epoch as u64, 0));
        let mut total = 0.0;
        let batches: Vec<Vec<usize>> = order.chunks(cfg.batch_size).map(<[usize]>::to_vec).collect();
        for (b, members) in batches.into_iter().enumerate() {
            let batch = Batch::new(corpus, members)?;
            let info = train_step(&mut store, cfg, &adam, &batch, &cached_scores, epoch).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch, batch: b, loss: f64::NAN },
                other => other,
            })?;
            let info = StepInfo { batch: b, ..info };
            if !info.loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss: info.loss });
            }
            on_step(&info);
            total += info.loss;
        }
        let batches_run = trainable.len().div_ceil(cfg.batch_size);
        let mean = total / batches_run as f64;
        log::info!("epoch {epoch}/{}: loss {mean:.6}", cfg.epochs());
        loss_log.push(mean);
    }
    store.round_to_f32();
    Ok(ModelCheckpoint { store, config: cfg.clone(), input_dim: corpus.feature_dim(), loss_log, featurization: Some(corpus.meta()) })
}

/// Mask sets for every member of `batch` at `epoch`, as merged-graph node
/// indices. `node_scores` holds one score per merged node.
pub fn batch_mask(cfg: &ModelConfig, batch: &Batch, node_scores: &[f64], epoch: usize) -> Result<Vec<usize>> {
    let mut masked = Vec::new();
    for (k, &gi) in batch.members.iter().enumerate() {
        let span = batch.span(k);
        let plan = plan_mask(&node_scores[span.clone()], &cfg.schedule, epoch, cfg.seed, gi as u64)?;
        masked.extend(plan.masked.iter().map(|&i| i + span.start));
    }
    Ok(masked)
}

fn train_step(
    store: &mut ParamStore,
    cfg: &ModelConfig,
    adam: &AdamConfig,
    batch: &Batch,
    cached: &[Vec<f64>],
    epoch: usize,
) -> Result<StepInfo> {
    let features = batch.graph.features();
    let mut tape = Tape::new();
    let x = tape.constant(features.clone())?;
    let (input, scores) = model_input(&mut tape, store, cfg, &batch.mp, x)?;
    let node_scores: Vec<f64> = match scores {
        Some(s) => tape.value(s).data().to_vec(),
        None => batch.members.iter().flat_map(|&gi| cached[gi].iter().copied()).collect(),
    };
    let masked = batch_mask(cfg, batch, &node_scores, epoch)?;
    let loss = reconstruction_loss(&mut tape, store, cfg, &batch.mp, input, features, &masked)?;
    let loss_value = tape.value(loss).get(0, 0);
    let grads = tape.backward(loss)?;
    store.accumulate(&grads, &tape)?;
    let scorer_grad_norm = store.grad_norm(&format!("{SCORER_PREFIX}."));
    store.update_running_stats(&tape.take_batch_stats(), BN_MOMENTUM)?;
    store.adam_step(adam)?;
    Ok(StepInfo { epoch, batch: 0, loss: loss_value, masked_nodes: masked.len(), scorer_grad_norm })
}

/// Predefined scores of every corpus graph, in corpus order.
pub fn score_cache(corpus: &GraphCorpus, metric: Metric) -> Result<Vec<Vec<f64>>> {
    corpus.graphs().par_iter().map(|g| predefined_scores(g, metric).map(|s| s.values().to_vec())).collect()
}

/// Per-node scores of a batch: the live scorer output for variant L, the
/// cached centralities otherwise.
pub fn batch_node_scores(store: &ParamStore, cfg: &ModelConfig, batch: &Batch, cache: &[Vec<f64>]) -> Result<Vec<f64>> {
    match cfg.variant {
        Variant::L => {
            let mut tape = Tape::new();
            let x = tape.constant(batch.graph.features().clone())?;
            let (_, s) = model_input(&mut tape, store, cfg, &batch.mp, x)?;
            Ok(tape.value(s.expect("variant L yields scores")).data().to_vec())
        }
        Variant::P => batch
            .members
            .iter()
            .map(|&gi| cache.get(gi).cloned().ok_or_else(|| Error::InvalidArgument(format!("no cached scores for graph {gi}"))))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.concat()),
    }
}
