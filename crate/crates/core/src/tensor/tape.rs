//! Reverse-mode differentiation over an explicit tape.
//!
//! Operations append nodes in evaluation order; [`Tape::backward`] walks
//! them in reverse and accumulates vector-Jacobian products. The op set is
//! deliberately small: it is exactly what the encoder, decoder, scorer and
//! reconstruction loss need.

use std::collections::HashMap;
use std::sync::Arc;

use super::{dot, Propagation, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    ScaleBy(Var, Var),
    Scale(Var, f64),
    Propagate(Var, Arc<Propagation>),
    Relu(Var),
    Prelu(Var, Var),
    Sigmoid(Var),
    RowScale(Var, Var),
    ReplaceRows { input: Var, token: Var, masked: Vec<bool> },
    GatherRows(Var, Vec<usize>),
    BatchNorm { input: Var, gamma: Var, beta: Var, xhat: Tensor, inv_std: Vec<f64>, batch_stats: bool },
    Sce { pred: Var, target: Tensor, gamma: f64 },
    SumSquares(Var),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Batch statistics observed by a train-mode batch norm, to be folded into
/// running averages by the caller.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub prefix: String,
    pub mean: Vec<f64>,
    /// Biased (1/n) variance, the same estimate used to normalize.
    pub var: Vec<f64>,
}

pub const SCE_NORM_EPS: f64 = 1e-12;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
    param_index: HashMap<String, Var>,
    activation_signs: Vec<bool>,
    batch_stats: Vec<BatchStats>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, name: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A non-trainable input.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, "constant")
    }

    /// Binds a named parameter. Binding the same name twice returns the
    /// same handle, so shared parameters accumulate a single gradient.
    pub fn param(&mut self, name: &str, value: &Tensor) -> Result<Var> {
        if let Some(&v) = self.param_index.get(name) {
            return Ok(v);
        }
        let v = self.push(value.clone(), Op::Leaf, name)?;
        self.params.push((name.to_string(), v));
        self.param_index.insert(name.to_string(), v);
        Ok(v)
    }

    /// Sign pattern of every ReLU/PReLU input seen so far. Two evaluations
    /// with equal patterns lie on the same linear piece.
    pub fn activation_signs(&self) -> &[bool] {
        &self.activation_signs
    }

    pub fn record_batch_stats(&mut self, stats: BatchStats) {
        self.batch_stats.push(stats);
    }

    pub fn take_batch_stats(&mut self) -> Vec<BatchStats> {
        std::mem::take(&mut self.batch_stats)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b))?;
        self.push(out, Op::Add(a, b), "add")
    }

    /// Adds a 1×d row to every row of an n×d matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(Error::shape("add_row", format!("1x{}", x.cols()), format!("{}x{}", r.rows(), r.cols())));
        }
        let mut out = x.clone();
        let bias = r.row(0).to_vec();
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&bias) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row), "add_row")
    }

    /// Multiplies a matrix by a 1×1 scalar variable.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let sv = self.value(s);
        if sv.shape() != [1, 1] {
            return Err(Error::shape("scale_by", "1x1", format!("{}x{}", sv.rows(), sv.cols())));
        }
        let out = self.value(a).scale(sv.get(0, 0));
        self.push(out, Op::ScaleBy(a, s), "scale_by")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).scale(c);
        self.push(out, Op::Scale(a, c), "scale")
    }

    pub fn propagate(&mut self, a: Var, prop: &Arc<Propagation>) -> Result<Var> {
        let out = prop.apply(self.value(a))?;
        self.push(out, Op::Propagate(a, Arc::clone(prop)), "propagate")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let signs: Vec<bool> = x.data().iter().map(|&v| v > 0.0).collect();
        let out = x.map(|v| v.max(0.0));
        self.activation_signs.extend(signs);
        self.push(out, Op::Relu(a), "relu")
    }

    /// Parametric ReLU with a single learnable 1×1 slope.
    pub fn prelu(&mut self, a: Var, slope: Var) -> Result<Var> {
        let k = self.value(slope);
        if k.shape() != [1, 1] {
            return Err(Error::shape("prelu", "1x1", format!("{}x{}", k.rows(), k.cols())));
        }
        let k = k.get(0, 0);
        let x = self.value(a);
        let signs: Vec<bool> = x.data().iter().map(|&v| v > 0.0).collect();
        let out = x.map(|v| if v > 0.0 { v } else { k * v });
        self.activation_signs.extend(signs);
        self.push(out, Op::Prelu(a, slope), "prelu")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a), "sigmoid")
    }

    /// Scales row i of `a` by `s[i]` (s is n×1).
    pub fn row_scale(&mut self, a: Var, s: Var) -> Result<Var> {
        let (x, sv) = (self.value(a), self.value(s));
        if sv.cols() != 1 || sv.rows() != x.rows() {
            return Err(Error::shape("row_scale", format!("{}x1", x.rows()), format!("{}x{}", sv.rows(), sv.cols())));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            let f = sv.get(i, 0);
            out.row_mut(i).iter_mut().for_each(|v| *v *= f);
        }
        self.push(out, Op::RowScale(a, s), "row_scale")
    }

    /// Replaces the listed rows of `a` by the 1×d `token`.
    pub fn replace_rows(&mut self, a: Var, rows: &[usize], token: Var) -> Result<Var> {
        let (x, t) = (self.value(a), self.value(token));
        if t.rows() != 1 || t.cols() != x.cols() {
            return Err(Error::shape("replace_rows", format!("1x{}", x.cols()), format!("{}x{}", t.rows(), t.cols())));
        }
        let mut masked = vec![false; x.rows()];
        for &i in rows {
            if i >= x.rows() {
                return Err(Error::InvalidArgument(format!("row {i} out of range {}", x.rows())));
            }
            masked[i] = true;
        }
        let mut out = x.clone();
        let tok = t.row(0).to_vec();
        for (i, &m) in masked.iter().enumerate() {
            if m {
                out.row_mut(i).copy_from_slice(&tok);
            }
        }
        self.push(out, Op::ReplaceRows { input: a, token, masked }, "replace_rows")
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&i) = rows.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::InvalidArgument(format!("row {i} out of range {}", x.rows())));
        }
        let out = x.select_rows(rows);
        self.push(out, Op::GatherRows(a, rows.to_vec()), "gather_rows")
    }

    /// Train-mode batch normalization over the rows of `a`.
    ///
    /// Returns the output and the observed batch statistics.
    pub fn batch_norm_train(&mut self, a: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, Vec<f64>, Vec<f64>)> {
        let x = self.value(a);
        let (n, d) = (x.rows(), x.cols());
        if n < 2 {
            return Err(Error::InvalidArgument(format!("batch norm in train mode needs at least 2 rows, got {n}")));
        }
        check_affine(self.value(gamma), self.value(beta), d)?;
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let biased: Vec<f64> = var.iter().map(|s| s / n as f64).collect();
        let inv_std: Vec<f64> = biased.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let out = self.normalize(a, gamma, beta, &mean, &inv_std, true)?;
        Ok((out, mean, biased))
    }

    /// Eval-mode batch normalization using fixed statistics.
    pub fn batch_norm_eval(&mut self, a: Var, gamma: Var, beta: Var, mean: &[f64], var: &[f64], eps: f64) -> Result<Var> {
        let d = self.value(a).cols();
        check_affine(self.value(gamma), self.value(beta), d)?;
        if mean.len() != d || var.len() != d {
            return Err(Error::shape("batch_norm_eval", d, mean.len().min(var.len())));
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        self.normalize(a, gamma, beta, mean, &inv_std, false)
    }

    fn normalize(&mut self, a: Var, gamma: Var, beta: Var, mean: &[f64], inv_std: &[f64], batch_stats: bool) -> Result<Var> {
        let x = self.value(a);
        let g = self.value(gamma).row(0).to_vec();
        let b = self.value(beta).row(0).to_vec();
        let mut xhat = x.clone();
        for i in 0..xhat.rows() {
            for (j, v) in xhat.row_mut(i).iter_mut().enumerate() {
                *v = (*v - mean[j]) * inv_std[j];
            }
        }
        let mut out = xhat.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = g[j] * *v + b[j];
            }
        }
        let op = Op::BatchNorm { input: a, gamma, beta, xhat, inv_std: inv_std.to_vec(), batch_stats };
        self.push(out, op, "batch_norm")
    }

    /// Scaled cosine error between `pred` and a constant `target`:
    /// `mean_i (1 − cos(pred_i, target_i))^gamma`.
    pub fn sce_loss(&mut self, pred: Var, target: &Tensor, gamma: f64) -> Result<Var> {
        let p = self.value(pred);
        if !p.same_shape(target) {
            return Err(Error::shape("sce_loss", format!("{}x{}", target.rows(), target.cols()), format!("{}x{}", p.rows(), p.cols())));
        }
        if p.rows() == 0 {
            return Err(Error::InvalidArgument("scaled cosine error over an empty row set".into()));
        }
        let mut total = 0.0;
        for i in 0..p.rows() {
            let x = target.row(i);
            if x.iter().all(|&v| v == 0.0) {
                log::warn!("sce_loss: target row {i} is zero; cosine undefined, row contributes 1");
            }
            let c = cosine(p.row(i), x);
            total += (1.0 - c).powf(gamma);
        }
        let out = Tensor::scalar(total / p.rows() as f64);
        self.push(out, Op::Sce { pred, target: target.clone(), gamma }, "sce_loss")
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum_squares());
        self.push(out, Op::SumSquares(a), "sum_squares")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a), "sum")
    }

    /// Back-propagates from a 1×1 `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).shape() != [1, 1] {
            return Err(Error::shape("backward", "1x1 loss", format!("{:?}", self.value(loss).shape())));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |v: Var, t: Tensor| -> Result<()> {
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&t),
                    slot @ None => {
                        *slot = Some(t);
                        Ok(())
                    }
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(*a, g.matmul_t(bv)?)?;
                    acc(*b, av.t_matmul(&g)?)?;
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone())?;
                    acc(*b, g.clone())?;
                }
                Op::AddRow(a, r) => {
                    let mut gr = Tensor::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, v) in gr.row_mut(0).iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    acc(*a, g.clone())?;
                    acc(*r, gr)?;
                }
                Op::ScaleBy(a, s) => {
                    let sv = self.value(*s).get(0, 0);
                    let ds = dot(g.data(), self.value(*a).data());
                    acc(*a, g.scale(sv))?;
                    acc(*s, Tensor::scalar(ds))?;
                }
                Op::Scale(a, c) => acc(*a, g.scale(*c))?,
                Op::Propagate(a, prop) => acc(*a, prop.apply_transpose(&g)?)?,
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut d = g.clone();
                    for (o, &v) in d.data_mut().iter_mut().zip(x.data()) {
                        if v <= 0.0 {
                            *o = 0.0;
                        }
                    }
                    acc(*a, d)?;
                }
                Op::Prelu(a, slope) => {
                    let x = self.value(*a);
                    let k = self.value(*slope).get(0, 0);
                    let mut d = g.clone();
                    let mut dk = 0.0;
                    for ((o, &v), &gv) in d.data_mut().iter_mut().zip(x.data()).zip(g.data()) {
                        if v <= 0.0 {
                            *o = k * gv;
                            dk += gv * v;
                        }
                    }
                    acc(*a, d)?;
                    acc(*slope, Tensor::scalar(dk))?;
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let mut d = g.clone();
                    for (o, &s) in d.data_mut().iter_mut().zip(y.data()) {
                        *o *= s * (1.0 - s);
                    }
                    acc(*a, d)?;
                }
                Op::RowScale(a, s) => {
                    let (x, sv) = (self.value(*a), self.value(*s));
                    let mut dx = g.clone();
                    let mut ds = Tensor::zeros(sv.rows(), 1);
                    for i in 0..x.rows() {
                        ds.set(i, 0, dot(g.row(i), x.row(i)));
                        let f = sv.get(i, 0);
                        dx.row_mut(i).iter_mut().for_each(|v| *v *= f);
                    }
                    acc(*a, dx)?;
                    acc(*s, ds)?;
                }
                Op::ReplaceRows { input, token, masked } => {
                    let mut dx = g.clone();
                    let mut dt = Tensor::zeros(1, g.cols());
                    for (i, &m) in masked.iter().enumerate() {
                        if m {
                            for (o, v) in dt.row_mut(0).iter_mut().zip(g.row(i)) {
                                *o += v;
                            }
                            dx.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
                        }
                    }
                    acc(*input, dx)?;
                    acc(*token, dt)?;
                }
                Op::GatherRows(a, rows) => {
                    let x = self.value(*a);
                    let mut dx = Tensor::zeros(x.rows(), x.cols());
                    for (k, &i) in rows.iter().enumerate() {
                        for (o, v) in dx.row_mut(i).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    acc(*a, dx)?;
                }
                Op::BatchNorm { input, gamma, beta, xhat, inv_std, batch_stats } => {
                    let (n, d) = (xhat.rows(), xhat.cols());
                    let gam = self.value(*gamma).row(0).to_vec();
                    let mut dgamma = Tensor::zeros(1, d);
                    let mut dbeta = Tensor::zeros(1, d);
                    for i in 0..n {
                        for j in 0..d {
                            let gv = g.get(i, j);
                            dgamma.data_mut()[j] += gv * xhat.get(i, j);
                            dbeta.data_mut()[j] += gv;
                        }
                    }
                    let mut dx = Tensor::zeros(n, d);
                    if *batch_stats {
                        // dx = inv_std/n · (n·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
                        for j in 0..d {
                            let nf = n as f64;
                            let sum_dxhat = dbeta.data()[j] * gam[j];
                            let sum_dxhat_xhat = dgamma.data()[j] * gam[j];
                            for i in 0..n {
                                let dxhat = g.get(i, j) * gam[j];
                                let v = inv_std[j] / nf * (nf * dxhat - sum_dxhat - xhat.get(i, j) * sum_dxhat_xhat);
                                dx.set(i, j, v);
                            }
                        }
                    } else {
                        for i in 0..n {
                            for j in 0..d {
                                dx.set(i, j, g.get(i, j) * gam[j] * inv_std[j]);
                            }
                        }
                    }
                    acc(*input, dx)?;
                    acc(*gamma, dgamma)?;
                    acc(*beta, dbeta)?;
                }
                Op::Sce { pred, target, gamma } => {
                    let p = self.value(*pred);
                    let m = p.rows() as f64;
                    let upstream = g.get(0, 0);
                    let mut dp = Tensor::zeros(p.rows(), p.cols());
                    for i in 0..p.rows() {
                        let row_grad = sce_row_grad(p.row(i), target.row(i), *gamma);
                        for (o, v) in dp.row_mut(i).iter_mut().zip(row_grad) {
                            *o = upstream * v / m;
                        }
                    }
                    acc(*pred, dp)?;
                }
                Op::SumSquares(a) => {
                    let s = g.get(0, 0);
                    acc(*a, self.value(*a).scale(2.0 * s))?;
                }
                Op::Sum(a) => {
                    let x = self.value(*a);
                    acc(*a, Tensor::filled(x.rows(), x.cols(), g.get(0, 0)))?;
                }
            }
            // Leaves keep their gradient for the caller.
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
            }
        }
        Ok(Gradients { grads, params: self.params.clone() })
    }
}

fn check_affine(gamma: &Tensor, beta: &Tensor, d: usize) -> Result<()> {
    for t in [gamma, beta] {
        if t.shape() != [1, d] {
            return Err(Error::shape("batch_norm", format!("1x{d}"), format!("{}x{}", t.rows(), t.cols())));
        }
    }
    Ok(())
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cosine similarity with both norms floored at [`SCE_NORM_EPS`].
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt().max(SCE_NORM_EPS);
    let nb = dot(b, b).sqrt().max(SCE_NORM_EPS);
    dot(a, b) / (na * nb)
}

/// d/dp of (1 − cos(p, x))^gamma.
fn sce_row_grad(p: &[f64], x: &[f64], gamma: f64) -> Vec<f64> {
    let np_raw = dot(p, p).sqrt();
    let np = np_raw.max(SCE_NORM_EPS);
    let nx = dot(x, x).sqrt().max(SCE_NORM_EPS);
    let c = dot(p, x) / (np * nx);
    let dl_dc = -gamma * (1.0 - c).powf(gamma - 1.0);
    p.iter()
        .zip(x)
        .map(|(&pv, &xv)| {
            let dc_dp = if np_raw > SCE_NORM_EPS { xv / (np * nx) - c * pv / (np * np) } else { xv / (np * nx) };
            dl_dc * dc_dp
        })
        .collect()
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(String, Var)>,
}

impl Gradients {
    /// Gradient with respect to any leaf; `None` when the loss does not
    /// depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradients of all bound parameters, in binding order. Parameters the
    /// loss does not reach get a zero gradient.
    pub fn params<'a>(&'a self, tape: &'a Tape) -> impl Iterator<Item = (&'a str, Tensor)> + 'a {
        self.params.iter().map(move |(name, v)| {
            let g = self.wrt(*v).cloned().unwrap_or_else(|| {
                let val = tape.value(*v);
                Tensor::zeros(val.rows(), val.cols())
            });
            (name.as_str(), g)
        })
    }
}
