//! Encoder, re-mask, decoder and reconstruction loss, recorded on a tape.

use super::{ModelConfig, Variant};
use crate::error::{Error, Result};
use crate::masking::apply_mask;
use crate::nn::layers::{gcn_layer, gin_layer, init_gcn, init_gin, init_linear, init_prelu, linear, prelu};
use crate::nn::{LayerKind, MessagePassing, Mode, ParamStore};
use crate::rng::{stream, Role};
use crate::scoring::{init_scorer, learnable_scores, modulate_features};
use crate::tensor::{Tape, Tensor, Var};

pub const ENC_MASK_TOKEN: &str = "enc_mask_token";
pub const DEC_MASK_TOKEN: &str = "dec_mask_token";
pub const ENC_TO_DEC: &str = "encoder_to_decoder";

fn enc_prefix(l: usize) -> String {
    format!("encoder.layer{l}")
}

fn dec_prefix(l: usize) -> String {
    format!("decoder.layer{l}")
}

fn init_stack(
    store: &mut ParamStore,
    kind: LayerKind,
    prefix: &str,
    fan_in: usize,
    hidden: usize,
    fan_out: usize,
    act: bool,
    rng: &mut crate::rng::Rng,
) {
    match kind {
        LayerKind::Gin => {
            init_gin(store, prefix, fan_in, hidden, fan_out, rng);
            if act {
                init_prelu(store, &format!("{prefix}.act"));
            }
        }
        LayerKind::Gcn => init_gcn(store, prefix, fan_in, fan_out, rng),
    }
}

/// Fresh parameters for `cfg` on `input_dim`-wide features, drawn from the
/// config seed.
pub fn init_model(cfg: &ModelConfig, input_dim: usize) -> Result<ParamStore> {
    cfg.validate()?;
    if input_dim == 0 {
        return Err(Error::InvalidArgument("input feature width must be >= 1".into()));
    }
    let mut rng = stream(cfg.seed, Role::ParamInit, 0, 0);
    let mut store = ParamStore::new();
    let hidden = cfg.encoder.hidden;
    for l in 0..cfg.encoder.num_layers {
        let fan_in = if l == 0 { input_dim } else { hidden };
        init_stack(&mut store, cfg.encoder.layer_type, &enc_prefix(l), fan_in, hidden, hidden, true, &mut rng);
    }
    init_linear(&mut store, ENC_TO_DEC, hidden, hidden, false, &mut rng);
    let last = cfg.decoder.num_layers - 1;
    for l in 0..=last {
        let fan_out = if l == last { input_dim } else { hidden };
        init_stack(&mut store, cfg.decoder.layer_type, &dec_prefix(l), hidden, hidden, fan_out, l != last, &mut rng);
    }
    store.insert(ENC_MASK_TOKEN, Tensor::zeros(1, input_dim));
    store.insert(DEC_MASK_TOKEN, Tensor::zeros(1, hidden));
    if cfg.variant == Variant::L {
        init_scorer(&mut store, &cfg.scorer, input_dim, &mut rng);
    }
    Ok(store)
}

fn run_layer(
    tape: &mut Tape,
    store: &ParamStore,
    kind: LayerKind,
    prefix: &str,
    mp: &MessagePassing,
    h: Var,
    act: bool,
    mode: Mode,
) -> Result<Var> {
    match kind {
        LayerKind::Gin => {
            let out = gin_layer(tape, store, prefix, &mp.sum, h, mode)?;
            if act {
                prelu(tape, store, &format!("{prefix}.act"), out)
            } else {
                Ok(out)
            }
        }
        LayerKind::Gcn => gcn_layer(tape, store, prefix, &mp.gcn, h, act),
    }
}

/// Node embeddings `n × hidden` over the full adjacency.
pub fn encode(tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig, mp: &MessagePassing, x: Var, mode: Mode) -> Result<Var> {
    let mut h = x;
    for l in 0..cfg.encoder.num_layers {
        h = run_layer(tape, store, cfg.encoder.layer_type, &enc_prefix(l), mp, h, true, mode)?;
    }
    Ok(h)
}

/// Replaces the masked rows of the embeddings with the decoder token.
pub fn remask(tape: &mut Tape, store: &ParamStore, h: Var, masked: &[usize]) -> Result<Var> {
    let token = store.bind(tape, DEC_MASK_TOKEN)?;
    tape.replace_rows(h, masked, token)
}

/// Reconstruction `n × d` from (re-masked) embeddings.
pub fn decode(tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig, mp: &MessagePassing, h: Var, mode: Mode) -> Result<Var> {
    let mut z = linear(tape, store, ENC_TO_DEC, h)?;
    let last = cfg.decoder.num_layers - 1;
    for l in 0..=last {
        z = run_layer(tape, store, cfg.decoder.layer_type, &dec_prefix(l), mp, z, l != last, mode)?;
    }
    Ok(z)
}

/// The encoder input for a training step and, for variant L, the score
/// column that modulated it.
pub fn model_input(tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig, mp: &MessagePassing, x: Var) -> Result<(Var, Option<Var>)> {
    match cfg.variant {
        Variant::P => Ok((x, None)),
        Variant::L => {
            let s = learnable_scores(tape, store, &cfg.scorer, mp, x)?;
            Ok((modulate_features(tape, x, s)?, Some(s)))
        }
    }
}

/// Masks `input`, encodes, re-masks, decodes and returns the scaled cosine
/// error on the masked rows against `target`.
pub fn reconstruction_loss(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    mp: &MessagePassing,
    input: Var,
    target: &Tensor,
    masked: &[usize],
) -> Result<Var> {
    let token = store.bind(tape, ENC_MASK_TOKEN)?;
    let x_masked = apply_mask(tape, input, masked, token)?;
    let h = encode(tape, store, cfg, mp, x_masked, Mode::Train)?;
    let h = remask(tape, store, h, masked)?;
    let recon = decode(tape, store, cfg, mp, h, Mode::Train)?;
    let pred = tape.gather_rows(recon, masked)?;
    tape.sce_loss(pred, &target.select_rows(masked), cfg.sce_gamma)
}

/// The whole training objective for fixed mask sets: builds the input from
/// the raw `features` (modulated for variant L) and reconstructs the raw
/// features.
pub fn masked_objective(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    mp: &MessagePassing,
    features: &Tensor,
    masked: &[usize],
) -> Result<Var> {
    let x = tape.constant(features.clone())?;
    let (input, _) = model_input(tape, store, cfg, mp, x)?;
    reconstruction_loss(tape, store, cfg, mp, input, features, masked)
}

/// Inference-time embeddings: no masking, batch norm on running
/// statistics, and modulation only when `modulate` is set.
pub fn embed_nodes(store: &ParamStore, cfg: &ModelConfig, mp: &MessagePassing, features: &Tensor, modulate: bool) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.constant(features.clone())?;
    let input = if modulate && cfg.variant == Variant::L { model_input(&mut tape, store, cfg, mp, x)?.0 } else { x };
    let h = encode(&mut tape, store, cfg, mp, input, Mode::Eval)?;
    Ok(tape.value(h).clone())
}
