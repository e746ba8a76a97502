use std::collections::VecDeque;

use super::{Metric, ScoreVector};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct PageRank {
    pub scores: ScoreVector,
    pub iterations: usize,
    pub converged: bool,
}

/// PageRank by power iteration from the uniform vector.
///
/// Each sweep computes `s_i ← (1−e)/n + e·(Σ_{j∈N(i)} s_j/deg(j) + D/n)`
/// where `D` is the mass sitting on isolated nodes, so the vector keeps
/// summing to one. Stops when the L1 change drops below `tol`.
pub fn pagerank(graph: &Graph, damping: f64, tol: f64, max_iter: usize) -> Result<PageRank> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::InvalidArgument(format!("damping must lie in (0, 1), got {damping}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = graph.node_count();
    let nf = n as f64;
    let degree = graph.degrees();
    let mut s = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&j| degree[j] == 0).map(|j| s[j]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        for (i, out) in next.iter_mut().enumerate() {
            let inflow: f64 = graph.neighbors(i)?.iter().map(|&j| s[j] / degree[j] as f64).sum();
            *out = base + damping * inflow;
        }
        let change: f64 = s.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        if !change.is_finite() {
            return Err(Error::NonFinite("pagerank".into()));
        }
        std::mem::swap(&mut s, &mut next);
        if change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("pagerank: {max_iter} iterations without reaching tolerance {tol}");
    }
    Ok(PageRank { scores: ScoreVector::new(s, Metric::Pagerank)?, iterations, converged })
}

pub fn degree_scores(graph: &Graph) -> ScoreVector {
    let values = graph.degrees().into_iter().map(|d| d as f64).collect();
    ScoreVector::new(values, Metric::Degree).expect("degrees are finite")
}

fn bfs_distances(graph: &Graph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; graph.node_count()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].unwrap();
        for &w in graph.neighbors(v).expect("in range") {
            if dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Closeness with the reachable-set correction for disconnected graphs:
/// `((r−1)/(n−1)) · ((r−1)/Σ d(i, j))` over the `r` nodes reachable from
/// `i` (itself included); zero when nothing else is reachable.
pub fn closeness_scores(graph: &Graph) -> ScoreVector {
    let n = graph.node_count();
    let values = (0..n)
        .map(|i| {
            let dist = bfs_distances(graph, i);
            let (reach, total) = dist.iter().flatten().fold((0usize, 0usize), |(r, t), &d| (r + 1, t + d));
            if reach <= 1 {
                0.0
            } else {
                let others = (reach - 1) as f64;
                (others / (n - 1) as f64) * (others / total as f64)
            }
        })
        .collect();
    ScoreVector::new(values, Metric::Closeness).expect("finite")
}

/// Unnormalized shortest-path betweenness (Brandes), each unordered pair
/// counted once.
///
/// Dependencies are accumulated in exact integer arithmetic and converted
/// to `f64` once per node, so the result is the correctly reduced fraction
/// rounded a single time. Graphs whose path counts overflow `u128` fall
/// back to floating-point accumulation.
pub fn betweenness_scores(graph: &Graph) -> ScoreVector {
    let values = betweenness_exact(graph).unwrap_or_else(|| {
        log::debug!("betweenness: path counts overflow u128, using floating point");
        betweenness_float(graph)
    });
    ScoreVector::new(values, Metric::Betweenness).expect("finite")
}

/// BFS from `s`: visit order, shortest-path predecessors and distances.
struct Sweep {
    order: Vec<usize>,
    preds: Vec<Vec<usize>>,
    dist: Vec<usize>,
}

impl Sweep {
    fn new(n: usize) -> Self {
        Sweep { order: Vec::with_capacity(n), preds: vec![Vec::new(); n], dist: vec![usize::MAX; n] }
    }

    fn run(&mut self, graph: &Graph, s: usize) {
        self.order.clear();
        self.preds.iter_mut().for_each(Vec::clear);
        self.dist.iter_mut().for_each(|x| *x = usize::MAX);
        self.dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            self.order.push(v);
            for &w in graph.neighbors(v).expect("in range") {
                if self.dist[w] == usize::MAX {
                    self.dist[w] = self.dist[v] + 1;
                    queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.preds[w].push(v);
                }
            }
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Nonnegative fraction in lowest terms.
#[derive(Clone, Copy)]
struct Frac {
    num: u128,
    den: u128,
}

impl Frac {
    const ZERO: Frac = Frac { num: 0, den: 1 };

    fn new(num: u128, den: u128) -> Frac {
        let g = gcd(num, den).max(1);
        Frac { num: num / g, den: den / g }
    }

    fn checked_add(self, o: Frac) -> Option<Frac> {
        let g = gcd(self.den, o.den);
        let den = (self.den / g).checked_mul(o.den)?;
        let num = self.num.checked_mul(o.den / g)?.checked_add(o.num.checked_mul(self.den / g)?)?;
        Some(Frac::new(num, den))
    }
}

/// Per source `s`, with `L` the lcm of all path counts `σ_w`, the scaled
/// dependency `F(v) = L·δ(v)/σ_v = Σ_{w: v∈P(w)} (L/σ_w + F(w))` is an
/// integer, and `δ(v) = σ_v·F(v)/L`.
fn betweenness_exact(graph: &Graph) -> Option<Vec<f64>> {
    let n = graph.node_count();
    let mut sweep = Sweep::new(n);
    let mut sigma = vec![0u128; n];
    let mut f = vec![0u128; n];
    let mut acc = vec![Frac::ZERO; n];
    for s in 0..n {
        sweep.run(graph, s);
        sigma.iter_mut().for_each(|x| *x = 0);
        sigma[s] = 1;
        let mut lcm: u128 = 1;
        for &w in &sweep.order[1..] {
            let mut total: u128 = 0;
            for &v in &sweep.preds[w] {
                total = total.checked_add(sigma[v])?;
            }
            sigma[w] = total;
            lcm = (lcm / gcd(lcm, total)).checked_mul(total)?;
        }
        f.iter_mut().for_each(|x| *x = 0);
        for &w in sweep.order.iter().rev() {
            let share = (lcm / sigma[w]).checked_add(f[w])?;
            for &v in &sweep.preds[w] {
                f[v] = f[v].checked_add(share)?;
            }
            if w != s && f[w] != 0 {
                acc[w] = acc[w].checked_add(Frac::new(sigma[w].checked_mul(f[w])?, lcm))?;
            }
        }
    }
    // Every unordered pair was visited from both ends.
    acc.iter().map(|c| Some(Frac::new(c.num, c.den.checked_mul(2)?))).map(|c| c.map(|c| c.num as f64 / c.den as f64)).collect()
}

fn betweenness_float(graph: &Graph) -> Vec<f64> {
    let n = graph.node_count();
    let mut sweep = Sweep::new(n);
    let mut centrality = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut delta = vec![0.0; n];
    for s in 0..n {
        sweep.run(graph, s);
        sigma.iter_mut().for_each(|x| *x = 0.0);
        delta.iter_mut().for_each(|x| *x = 0.0);
        sigma[s] = 1.0;
        for &w in &sweep.order[1..] {
            sigma[w] = sweep.preds[w].iter().map(|&v| sigma[v]).sum();
        }
        for &w in sweep.order.iter().rev() {
            for &v in &sweep.preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    centrality.iter_mut().for_each(|c| *c /= 2.0);
    centrality
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, e: &[(usize, usize)]) -> Graph {
        Graph::structure(n, e).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    fn star4() -> Graph {
        g(5, &[(0, 1), (0, 2), (0, 3), (0, 4)])
    }

    fn k4() -> Graph {
        g(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    }

    #[test]
    fn pagerank_examples() {
        let c3 = g(3, &[(0, 1), (1, 2), (0, 2)]);
        let pr = pagerank(&c3, 0.85, 1e-10, 200).unwrap();
        assert!(close(pr.scores.values(), &[1.0 / 3.0; 3], 1e-12));
        assert!(pr.converged);

        let single = pagerank(&g(1, &[]), 0.85, 1e-10, 200).unwrap();
        assert!(close(single.scores.values(), &[1.0], 1e-12));

        let p3 = pagerank(&g(3, &[(0, 1), (1, 2)]), 0.85, 1e-10, 200).unwrap();
        let v = p3.scores.values();
        assert!((v[0] - v[2]).abs() < 1e-12 && v[1] > v[0]);
    }

    #[test]
    fn pagerank_rejects_bad_damping_and_reports_nonconvergence() {
        let p3 = g(3, &[(0, 1), (1, 2)]);
        assert!(pagerank(&p3, 1.0, 1e-10, 200).is_err());
        assert!(pagerank(&p3, 0.0, 1e-10, 200).is_err());
        let pr = pagerank(&p3, 0.85, 1e-30, 3).unwrap();
        assert!(!pr.converged);
        assert_eq!(pr.iterations, 3);
        assert!((pr.scores.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pagerank_with_isolated_nodes_sums_to_one() {
        let pr = pagerank(&g(4, &[(0, 1)]), 0.85, 1e-12, 500).unwrap();
        let v = pr.scores.values();
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((v[2] - v[3]).abs() < 1e-15);
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degree_scores(&k4()).values(), &[3.0; 4]);
        assert_eq!(degree_scores(&star4()).values(), &[4.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(degree_scores(&g(1, &[])).values(), &[0.0]);
    }

    #[test]
    fn closeness_examples() {
        assert!(close(closeness_scores(&g(3, &[(0, 1), (1, 2)])).values(), &[2.0 / 3.0, 1.0, 2.0 / 3.0], 1e-15));
        assert_eq!(closeness_scores(&g(2, &[])).values(), &[0.0, 0.0]);
        assert!(close(closeness_scores(&g(3, &[(0, 1), (1, 2), (0, 2)])).values(), &[1.0; 3], 1e-15));
    }

    #[test]
    fn betweenness_examples() {
        assert_eq!(betweenness_scores(&g(3, &[(0, 1), (1, 2)])).values(), &[0.0, 1.0, 0.0]);
        assert_eq!(betweenness_scores(&k4()).values(), &[0.0; 4]);
        assert_eq!(betweenness_scores(&star4()).values(), &[6.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn betweenness_splits_between_parallel_paths() {
        // 4-cycle: each node carries half of the opposite pair.
        let c4 = g(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        assert_eq!(betweenness_scores(&c4).values(), &[0.5; 4]);
    }

    #[test]
    fn exact_and_float_paths_agree() {
        let petersen = g(
            10,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (0, 5), (1, 6), (2, 7), (3, 8), (4, 9), (5, 7), (7, 9), (6, 9), (6, 8), (5, 8)],
        );
        let exact = betweenness_exact(&petersen).unwrap();
        assert!(close(&exact, &betweenness_float(&petersen), 1e-12));
        assert!(exact.iter().all(|&v| v == exact[0]));
    }
}
