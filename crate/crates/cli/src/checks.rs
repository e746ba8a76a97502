//! Built-in verification: the gradient suite and the `selftest` battery.

use rand::seq::index::sample;
use rand::Rng as _;
use smae_core::gmae::{init_model, masked_objective, DecoderConfig, EncoderConfig};
use smae_core::masking::{mask_count, plan_mask, schedule_k};
use smae_core::nn::{grad_check, GradCheckReport, MessagePassing};
use smae_core::oracle::{betweenness_naive, closeness_direct, pagerank_dense};
use smae_core::rng::{stream, Rng, Role};
use smae_core::scoring::{betweenness_scores, closeness_scores, pagerank, ScorerConfig, DEFAULT_DAMPING};
use smae_core::{Graph, LayerKind, MaskSchedule, ModelConfig, Result, Tensor, Variant};

pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const GRAD_STEP: f64 = smae_core::nn::DEFAULT_FIRST_STEP;
const FEATURE_DIM: usize = 4;

/// Random tree on `n` nodes plus each remaining pair with probability `p`.
pub fn random_connected_graph(n: usize, p: f64, rng: &mut Rng) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p && !edges.contains(&(i, j)) {
                edges.push((i, j));
            }
        }
    }
    Graph::structure(n, &edges).expect("valid by construction")
}

/// Erdős–Rényi `G(n, p)`, possibly disconnected.
pub fn random_graph(n: usize, p: f64, rng: &mut Rng) -> Graph {
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|_| rng.gen::<f64>() < p).collect();
    Graph::structure(n, &edges).expect("valid by construction")
}

#[derive(Debug, Clone)]
pub struct GradCase {
    pub variant: Variant,
    pub layer: LayerKind,
    pub nodes: usize,
    pub report: GradCheckReport,
}

/// Small two-layer model (batch norm inside every GIN layer) on a random
/// connected graph of 3 to `max_nodes` nodes with dense random features,
/// a random mask; checks the full training objective. Every trainable
/// tensor is jittered first: at the zero-initialized biases a masked row
/// whose ReLUs are all off decodes to exactly zero, where the cosine is not
/// differentiable.
pub fn gradient_case(variant: Variant, layer: LayerKind, max_nodes: usize, step: f64, seed: u64) -> Result<GradCase> {
    let tag = (variant == Variant::L) as u64 * 2 + (layer == LayerKind::Gcn) as u64;
    let mut rng = stream(seed, Role::GradCheck, 1, tag);
    let n = rng.gen_range(3..=max_nodes.max(3));
    let graph = random_connected_graph(n, 0.3, &mut rng);
    let x = Tensor::from_vec(n, FEATURE_DIM, (0..n * FEATURE_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let cfg = ModelConfig {
        variant,
        encoder: EncoderConfig { layer_type: layer, num_layers: 2, hidden: 5 },
        decoder: DecoderConfig { layer_type: layer, num_layers: 1 },
        scorer: ScorerConfig { layer_type: layer, alpha: 0.7, hidden: 3 },
        seed,
        ..ModelConfig::default()
    };
    let mut store = init_model(&cfg, FEATURE_DIM)?;
    let trainable: Vec<String> = store.iter().filter(|(_, e)| e.trainable).map(|(n, _)| n.to_string()).collect();
    for name in trainable {
        let mut t = store.get(&name)?.clone();
        t.data_mut().iter_mut().for_each(|v| *v += rng.gen_range(-0.3..0.3));
        store.set(&name, t)?;
    }
    let m = mask_count(0.5, n)?;
    let mut masked = sample(&mut rng, n, m).into_vec();
    masked.sort_unstable();
    let mp = MessagePassing::new(&graph);
    let report = grad_check(&store, |tape, s| masked_objective(tape, s, &cfg, &mp, &x, &masked), step, 200, seed)?;
    Ok(GradCase { variant, layer, nodes: n, report })
}

/// The gradient suite: every (variant, layer) combination on `instances`
/// graphs each.
pub fn gradient_suite(instances: usize, max_nodes: usize, seed: u64) -> Result<Vec<GradCase>> {
    let mut out = Vec::new();
    for variant in [Variant::P, Variant::L] {
        for layer in [LayerKind::Gin, LayerKind::Gcn] {
            for k in 0..instances {
                out.push(gradient_case(variant, layer, max_nodes, GRAD_STEP, seed.wrapping_add(k as u64))?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { name, passed, detail }
}

fn check_pagerank(rng: &mut Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.gen_range(1..=60);
        let g = random_connected_graph(n, 0.05, rng);
        let fast = pagerank(&g, DEFAULT_DAMPING, 1e-12, 1000)?;
        let slow = pagerank_dense(&g, DEFAULT_DAMPING, 1e-12, 1000);
        worst = fast.scores.values().iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok(outcome("pagerank matches dense oracle", worst < 1e-8, format!("max |diff| = {worst:.2e}")))
}

fn check_betweenness(rng: &mut Rng) -> Outcome {
    let mut mismatches = 0;
    for _ in 0..20 {
        let n = rng.gen_range(1..=12);
        let g = random_graph(n, rng.gen_range(0.1..0.8), rng);
        if betweenness_scores(&g).values() != betweenness_naive(&g).as_slice() {
            mismatches += 1;
        }
    }
    outcome("betweenness equals path-counting oracle", mismatches == 0, format!("{mismatches} of 20 graphs differ"))
}

fn check_closeness(rng: &mut Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(1..=20);
        let g = random_graph(n, 0.2, rng);
        worst = closeness_scores(&g).values().iter().zip(closeness_direct(&g)).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    outcome("closeness matches distance-matrix oracle", worst <= 1e-12, format!("max |diff| = {worst:.2e}"))
}

fn check_gradients(seed: u64) -> Result<Outcome> {
    let cases = gradient_suite(1, 8, seed)?;
    let worst = cases.iter().map(|c| c.report.max_rel_error).fold(0.0, f64::max);
    Ok(outcome("end-to-end gradients match finite differences", worst < GRAD_TOLERANCE, format!("max rel error = {worst:.2e}")))
}

fn check_schedule(rng: &mut Rng) -> Result<Outcome> {
    let mut failures = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=50);
        let percent: usize = rng.gen_range(1..100);
        let schedule = MaskSchedule {
            p: percent as f64 / 100.0,
            epochs: rng.gen_range(1..=60),
            warmup_ratio: rng.gen_range(0.0..0.9),
            ..MaskSchedule::default()
        };
        let ks = (0..=schedule.epochs).map(|t| schedule_k(t, &schedule, n)).collect::<Result<Vec<_>>>()?;
        let ok = ks[0] == 0 && ks.windows(2).all(|w| w[0] <= w[1]) && ks[schedule.epochs] == percent * n / 100;
        let plan = plan_mask(&vec![1.0; n], &schedule, schedule.epochs, rng.gen(), 0)?;
        if !ok || plan.masked.len() != (percent * n).div_ceil(100).clamp(1, n - 1) {
            failures += 1;
        }
    }
    Ok(outcome("curriculum schedule and mask counts", failures == 0, format!("{failures} of 200 draws violate")))
}

/// Runs the battery; each check is seeded from `seed`.
pub fn selftest(seed: u64) -> Result<Vec<Outcome>> {
    let mut rng = stream(seed, Role::GradCheck, 2, 0);
    Ok(vec![
        check_pagerank(&mut rng)?,
        check_betweenness(&mut rng),
        check_closeness(&mut rng),
        check_gradients(seed)?,
        check_schedule(&mut rng)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_graphs_are_simple() {
        let mut rng = stream(0, Role::GradCheck, 9, 9);
        for n in 1..15 {
            let g = random_connected_graph(n, 0.4, &mut rng);
            assert_eq!(g.node_count(), n);
            assert!(g.edges().len() >= n - 1);
        }
    }
}
