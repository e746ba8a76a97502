//! Slow, direct reference computations used to cross-check the fast paths.
//!
//! Nothing here shares code with the implementations it checks: distances
//! come from Floyd–Warshall on a dense matrix, PageRank from a dense
//! transition matrix, betweenness from explicit path counting.

use crate::graph::Graph;

const UNREACHABLE: usize = usize::MAX / 4;

/// Dense 0/1 adjacency.
pub fn dense_adjacency(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j) in g.edges() {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    a
}

/// All-pairs hop distances.
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut d = vec![vec![UNREACHABLE; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(i, j) in g.edges() {
        d[i][j] = 1;
        d[j][i] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Power iteration with a dense column-stochastic matrix; isolated nodes
/// get a uniform column.
pub fn pagerank_dense(g: &Graph, damping: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = g.node_count();
    let a = dense_adjacency(g);
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..n {
        let deg: f64 = (0..n).map(|i| a[i][j]).sum();
        for i in 0..n {
            m[i][j] = if deg == 0.0 { 1.0 / n as f64 } else { a[i][j] / deg };
        }
    }
    let mut s = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let next: Vec<f64> = (0..n).map(|i| (1.0 - damping) / n as f64 + damping * (0..n).map(|j| m[i][j] * s[j]).sum::<f64>()).collect();
        let change: f64 = next.iter().zip(&s).map(|(a, b)| (a - b).abs()).sum();
        s = next;
        if change < tol {
            break;
        }
    }
    s
}

/// Closeness straight from the distance matrix (reachable-set scaling).
pub fn closeness_direct(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let d = floyd_warshall(g);
    (0..n)
        .map(|i| {
            let reach: Vec<usize> = (0..n).filter(|&j| j != i && d[i][j] < UNREACHABLE).collect();
            if reach.is_empty() {
                return 0.0;
            }
            let r = reach.len() as f64;
            let total: usize = reach.iter().map(|&j| d[i][j]).sum();
            (r / (n - 1) as f64) * (r / total as f64)
        })
        .collect()
}

/// Number of shortest paths between every pair, by dynamic programming
/// over distance layers.
fn path_counts(g: &Graph, d: &[Vec<usize>]) -> Vec<Vec<u128>> {
    let n = g.node_count();
    let a = dense_adjacency(g);
    let mut sigma = vec![vec![0u128; n]; n];
    for s in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&v| d[s][v] < UNREACHABLE).collect();
        order.sort_by_key(|&v| d[s][v]);
        sigma[s][s] = 1;
        for &v in &order {
            if v == s {
                continue;
            }
            sigma[s][v] = (0..n).filter(|&u| a[u][v] == 1.0 && d[s][u] + 1 == d[s][v]).map(|u| sigma[s][u]).sum();
        }
    }
    sigma
}

/// Betweenness as exact fractions `Σ_{s<t} σ_st(v)/σ_st`, returned as
/// (numerator, denominator) pairs over a common denominator per node.
pub fn betweenness_rational(g: &Graph) -> Vec<(u128, u128)> {
    let n = g.node_count();
    let d = floyd_warshall(g);
    let sigma = path_counts(g, &d);
    let gcd = |mut a: u128, mut b: u128| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let mut out = vec![(0u128, 1u128); n];
    for s in 0..n {
        for t in s + 1..n {
            if d[s][t] >= UNREACHABLE {
                continue;
            }
            for (v, acc) in out.iter_mut().enumerate() {
                if v == s || v == t || d[s][v] + d[v][t] != d[s][t] {
                    continue;
                }
                let (num, den) = (sigma[s][v] * sigma[v][t], sigma[s][t]);
                let (an, ad) = *acc;
                let (nn, nd) = (an * den + num * ad, ad * den);
                let k = gcd(nn, nd).max(1);
                *acc = (nn / k, nd / k);
            }
        }
    }
    out
}

pub fn betweenness_naive(g: &Graph) -> Vec<f64> {
    betweenness_rational(g).into_iter().map(|(n, d)| n as f64 / d as f64).collect()
}

/// `((1+ε)I + A) · H`, then `W1, b1`, batch norm with the given statistics,
/// ReLU, `W2, b2`, all as dense loops.
#[allow(clippy::too_many_arguments)]
pub fn gin_dense(
    g: &Graph,
    h: &[Vec<f64>],
    eps: f64,
    w1: &[Vec<f64>],
    b1: &[f64],
    bn: (&[f64], &[f64], &[f64], &[f64], f64),
    w2: &[Vec<f64>],
    b2: &[f64],
) -> Vec<Vec<f64>> {
    let a = dense_adjacency(g);
    let n = h.len();
    let agg: Vec<Vec<f64>> =
        (0..n).map(|i| (0..h[0].len()).map(|c| (1.0 + eps) * h[i][c] + (0..n).map(|j| a[i][j] * h[j][c]).sum::<f64>()).collect()).collect();
    let (gamma, beta, mean, var, bn_eps) = bn;
    let z = affine(&agg, w1, b1);
    let z: Vec<Vec<f64>> = z
        .iter()
        .map(|r| r.iter().enumerate().map(|(c, v)| (gamma[c] * (v - mean[c]) / (var[c] + bn_eps).sqrt() + beta[c]).max(0.0)).collect())
        .collect();
    affine(&z, w2, b2)
}

/// `D̃^{-1/2}(A+I)D̃^{-1/2} · H · W` from dense matrices.
pub fn gcn_dense(g: &Graph, h: &[Vec<f64>], w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut a = dense_adjacency(g);
    let n = h.len();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let hw = affine(h, w, &vec![0.0; w[0].len()]);
    (0..n).map(|i| (0..hw[0].len()).map(|c| (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt() * hw[j][c]).sum()).collect()).collect()
}

/// `X · W + b`.
pub fn affine(x: &[Vec<f64>], w: &[Vec<f64>], b: &[f64]) -> Vec<Vec<f64>> {
    x.iter().map(|r| (0..b.len()).map(|c| b[c] + r.iter().zip(w).map(|(v, wr)| v * wr[c]).sum::<f64>()).collect()).collect()
}

fn permutations_with(n: usize, k: usize, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
    fn go(n: usize, k: usize, cur: &mut Vec<usize>, used: &mut [bool], f: &mut impl FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == k {
            return f(cur);
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                if go(n, k, cur, used, f) {
                    return true;
                }
                cur.pop();
                used[v] = false;
            }
        }
        false
    }
    go(n, k, &mut Vec::new(), &mut vec![false; n], f)
}

/// Exhaustive search for a (not necessarily induced) `k`-cycle.
pub fn contains_cycle(g: &Graph, k: usize) -> bool {
    let a = dense_adjacency(g);
    permutations_with(g.node_count(), k, &mut |p| (0..k).all(|i| a[p[i]][p[(i + 1) % k]] == 1.0))
}

/// Exhaustive search for a `k`-clique.
pub fn contains_clique(g: &Graph, k: usize) -> bool {
    let a = dense_adjacency(g);
    permutations_with(g.node_count(), k, &mut |p| {
        p.windows(2).all(|w| w[0] < w[1]) && (0..k).all(|i| (i + 1..k).all(|j| a[p[i]][p[j]] == 1.0))
    })
}

/// Cosine similarity of every other row to `query`, computed without the
/// library's cosine helper. Zero-norm rows score 0.
pub fn cosine_ranking(rows: &[Vec<f64>], query: usize) -> Vec<(usize, f64)> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let q = &rows[query];
    let mut out: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != query)
        .map(|(i, r)| {
            let (nq, nr) = (norm(q), norm(r));
            let s = if nq == 0.0 || nr == 0.0 { 0.0 } else { q.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / (nq * nr) };
            (i, s)
        })
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motif_search() {
        let c5 = Graph::structure(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        assert!(contains_cycle(&c5, 5));
        assert!(!contains_clique(&c5, 3));
        let p5 = Graph::structure(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        assert!(!contains_cycle(&p5, 5));
    }

    #[test]
    fn rational_betweenness_of_c4() {
        let c4 = Graph::structure(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(betweenness_rational(&c4), vec![(1, 2); 4]);
    }
}
