//! Curriculum masking: how many structurally informative nodes are boosted
//! at each epoch, the noisy priorities that order nodes for masking, and
//! the mask set itself.

use std::cmp::Ordering;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Rng, Role};
use crate::tensor::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    EasyToHard,
    Random,
    Top,
    Middle,
    Bottom,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::EasyToHard, Strategy::Random, Strategy::Top, Strategy::Middle, Strategy::Bottom];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::EasyToHard => "easy_to_hard",
            Strategy::Random => "random",
            Strategy::Top => "top",
            Strategy::Middle => "middle",
            Strategy::Bottom => "bottom",
        }
    }

    fn is_static(self) -> bool {
        matches!(self, Strategy::Top | Strategy::Middle | Strategy::Bottom)
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| Error::InvalidArgument(format!("unknown masking strategy '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskSchedule {
    /// Mask ratio in (0, 1).
    pub p: f64,
    /// Priority boost for informative nodes.
    pub beta: f64,
    /// Total epochs T.
    pub epochs: usize,
    pub warmup_ratio: f64,
    pub strategy: Strategy,
    pub noise: bool,
}

impl Default for MaskSchedule {
    fn default() -> Self {
        Self { p: 0.5, beta: 0.5, epochs: 100, warmup_ratio: 0.0, strategy: Strategy::EasyToHard, noise: true }
    }
}

impl MaskSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidArgument(format!("mask ratio p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return Err(Error::InvalidArgument(format!("warmup_ratio must lie in [0, 1], got {}", self.warmup_ratio)));
        }
        Ok(())
    }
}

/// The mask set chosen for one graph at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPlan {
    /// Ascending node indices.
    pub masked: Vec<usize>,
    pub priorities: Vec<f64>,
    /// Ascending node indices of the boosted set.
    pub informative_set: Vec<usize>,
    pub epoch: usize,
    pub k_used: usize,
}

/// `x` as an integer when it is one up to rounding noise, so products such
/// as `0.3 · 10` floor and ceil to 3.
fn snap(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= 1e-9 * r.abs().max(1.0)).then_some(r)
}

fn floor_snapped(x: f64) -> usize {
    snap(x).unwrap_or_else(|| x.floor()) as usize
}

fn ceil_snapped(x: f64) -> usize {
    snap(x).unwrap_or_else(|| x.ceil()) as usize
}

/// `clamp(ceil(p·n), 1, n−1)`.
pub fn mask_count(p: f64, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("masking needs at least 2 nodes, got {n}")));
    }
    Ok(ceil_snapped(p * n as f64).clamp(1, n - 1))
}

/// Number of informative nodes boosted at epoch `t`:
/// `floor(p·n·sqrt(t_eff/T))`, zero throughout warm-up, where the epochs
/// after warm-up are stretched over the full `[0, T]` span.
pub fn schedule_k(t: usize, schedule: &MaskSchedule, n: usize) -> Result<usize> {
    let total = schedule.epochs;
    if t > total {
        return Err(Error::InvalidArgument(format!("epoch {t} outside [0, {total}]")));
    }
    let full = schedule.p * n as f64;
    if t == total {
        return Ok(floor_snapped(full));
    }
    let warm = schedule.warmup_ratio * total as f64;
    let t = t as f64;
    if t <= warm {
        return Ok(0);
    }
    let frac = (t - warm) / (total as f64 - warm);
    Ok(floor_snapped(full * frac.sqrt()))
}

/// The `k` highest-scoring indices (ascending), ties broken uniformly at
/// random.
pub fn informative_set(scores: &[f64], k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let n = scores.len();
    if k > n {
        return Err(Error::InvalidArgument(format!("cannot pick {k} of {n} nodes")));
    }
    let keys: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(keys[a].cmp(&keys[b])).then(a.cmp(&b)));
    let mut set = order[..k].to_vec();
    set.sort_unstable();
    Ok(set)
}

/// `γ_i = ε_i + β·[i ∈ 𝒴]` with `ε_i ~ U[0, 1)` when `noise` is on and 0
/// otherwise.
pub fn mask_priorities(n: usize, informative: &[usize], beta: f64, noise: bool, rng: &mut Rng) -> Result<Vec<f64>> {
    let mut gamma: Vec<f64> = if noise { (0..n).map(|_| rng.gen::<f64>()).collect() } else { vec![0.0; n] };
    for &i in informative {
        *gamma.get_mut(i).ok_or_else(|| Error::InvalidArgument(format!("informative index {i} out of range {n}")))? += beta;
    }
    Ok(gamma)
}

fn descending(values: &[f64], a: usize, b: usize) -> Ordering {
    values[b].total_cmp(&values[a])
}

/// Picks `clamp(ceil(p·n), 1, n−1)` nodes. Curriculum strategies take the
/// highest priorities; the static ablations take a fixed band of the score
/// ranking, using priorities only to break score ties.
pub fn select_mask(priorities: &[f64], scores: &[f64], schedule: &MaskSchedule) -> Result<Vec<usize>> {
    let n = priorities.len();
    if scores.len() != n {
        return Err(Error::shape("select_mask", n, scores.len()));
    }
    let m = mask_count(schedule.p, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    let start = if schedule.strategy.is_static() {
        order.sort_by(|&a, &b| descending(scores, a, b).then(descending(priorities, a, b)).then(a.cmp(&b)));
        match schedule.strategy {
            Strategy::Top => 0,
            Strategy::Middle => (n - m) / 2,
            _ => n - m,
        }
    } else {
        order.sort_by(|&a, &b| descending(priorities, a, b).then(a.cmp(&b)));
        0
    };
    let mut masked = order[start..start + m].to_vec();
    masked.sort_unstable();
    Ok(masked)
}

/// Full per-graph masking step. Noise and tie-breaking draw from separate
/// streams keyed by `(seed, graph, epoch)`, so the plan does not depend on
/// the order graphs are processed in, and with `β = 0` the curriculum
/// strategy masks exactly what [`Strategy::Random`] masks.
pub fn plan_mask(scores: &[f64], schedule: &MaskSchedule, epoch: usize, seed: u64, graph: u64) -> Result<MaskPlan> {
    let n = scores.len();
    let k = match schedule.strategy {
        Strategy::EasyToHard => schedule_k(epoch, schedule, n)?,
        _ => 0,
    };
    let mut ties = stream(seed, Role::TopKTieBreak, graph, epoch as u64);
    let informative = informative_set(scores, k, &mut ties)?;
    let mut noise = stream(seed, Role::MaskNoise, graph, epoch as u64);
    let priorities = mask_priorities(n, &informative, schedule.beta, schedule.noise, &mut noise)?;
    let masked = select_mask(&priorities, scores, schedule)?;
    Ok(MaskPlan { masked, priorities, informative_set: informative, epoch, k_used: k })
}

/// Replaces the masked rows of `x` with the learnable `1 × d` token.
pub fn apply_mask(tape: &mut Tape, x: Var, masked: &[usize], token: Var) -> Result<Var> {
    tape.replace_rows(x, masked, token)
}
