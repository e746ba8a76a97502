use super::Tensor;
use crate::error::{Error, Result};

/// A fixed sparse linear operator over graph nodes: `out_i = Σ_j w_ij · in_j`.
///
/// Each row's entries are kept in ascending column order, so the summation
/// order (and hence every bit of the result) is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    size: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Propagation {
    pub fn new(size: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != size {
            return Err(Error::shape("Propagation::new", size, rows.len()));
        }
        for r in &mut rows {
            r.sort_by_key(|&(j, _)| j);
            if let Some(&(j, _)) = r.iter().find(|&&(j, _)| j >= size) {
                return Err(Error::InvalidArgument(format!("propagation column {j} out of range {size}")));
            }
        }
        Ok(Propagation { size, rows })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn apply(&self, input: &Tensor) -> Result<Tensor> {
        if input.rows() != self.size {
            return Err(Error::shape("propagate", self.size, input.rows()));
        }
        let d = input.cols();
        let mut out = Tensor::zeros(self.size, d);
        for (i, entries) in self.rows.iter().enumerate() {
            let o = out.row_mut(i);
            for &(j, w) in entries {
                for (x, &v) in o.iter_mut().zip(input.row(j)) {
                    *x += w * v;
                }
            }
        }
        Ok(out)
    }

    /// Applies the transpose; used for the backward pass.
    pub fn apply_transpose(&self, grad: &Tensor) -> Result<Tensor> {
        if grad.rows() != self.size {
            return Err(Error::shape("propagate_transpose", self.size, grad.rows()));
        }
        let d = grad.cols();
        let mut out = Tensor::zeros(self.size, d);
        for (i, entries) in self.rows.iter().enumerate() {
            let g = grad.row(i);
            for &(j, w) in entries {
                for (x, v) in out.row_mut(j).iter_mut().zip(g) {
                    *x += w * v;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.size, self.size);
        for (i, entries) in self.rows.iter().enumerate() {
            for &(j, w) in entries {
                t.set(i, j, t.get(i, j) + w);
            }
        }
        t
    }
}
