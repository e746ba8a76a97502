use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::tensor::{cosine, dot};

/// The `k` rows most cosine-similar to row `query`, excluding the query
/// itself, in descending similarity with ties broken by index. Rows with
/// zero norm have similarity 0 and are reported in the log.
pub fn nearest_neighbors(emb: &EmbeddingMatrix, query: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let n = emb.len();
    if query >= n {
        return Err(Error::InvalidArgument(format!("query {query} out of range {n}")));
    }
    if k >= n {
        return Err(Error::InvalidArgument(format!("k = {k} must be below the row count {n}")));
    }
    let q = &emb.rows[query];
    let zero = |v: &[f64]| dot(v, v) == 0.0;
    if zero(q) {
        log::warn!("retrieval: query row {query} has zero norm; all similarities are 0");
    }
    let mut sims: Vec<(usize, f64)> = (0..n)
        .filter(|&i| i != query)
        .map(|i| {
            let r = &emb.rows[i];
            if zero(q) || zero(r) {
                if zero(r) {
                    log::warn!("retrieval: row {i} has zero norm; similarity set to 0");
                }
                (i, 0.0)
            } else {
                (i, cosine(q, r))
            }
        })
        .collect();
    sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    sims.truncate(k);
    Ok(sims)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
        EmbeddingMatrix::new(rows, None).unwrap()
    }

    #[test]
    fn duplicate_ranks_first() {
        let e = emb(vec![vec![1.0, 2.0], vec![0.0, 1.0], vec![2.0, 4.0], vec![-1.0, 0.0]]);
        let nn = nearest_neighbors(&e, 0, 2).unwrap();
        assert_eq!(nn[0].0, 2);
        assert!((nn[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(nn.len(), 2);
    }

    #[test]
    fn orthogonal_query_keeps_index_order() {
        let e = emb(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -3.0], vec![0.0, 2.0]]);
        assert_eq!(nearest_neighbors(&e, 0, 3).unwrap(), vec![(1, 0.0), (2, 0.0), (3, 0.0)]);
    }

    #[test]
    fn zero_rows_and_bad_k() {
        let e = emb(vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]]);
        let nn = nearest_neighbors(&e, 0, 2).unwrap();
        assert_eq!(nn[1], (1, 0.0));
        assert!(nearest_neighbors(&e, 0, 3).is_err());
        assert!(nearest_neighbors(&e, 5, 1).is_err());
    }
}
