//! Linear probe: multinomial logistic regression under repeated stratified
//! k-fold cross-validation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng, Role};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    pub folds: usize,
    pub repeats: usize,
    pub inner_folds: usize,
    pub iterations: usize,
    pub lr: f64,
    pub lambdas: Vec<f64>,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { folds: 10, repeats: 5, inner_folds: 3, iterations: 500, lr: 0.1, lambdas: vec![1e-3, 1e-2, 1e-1, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub mean_accuracy: f64,
    /// Population standard deviation over all fold accuracies.
    pub std_accuracy: f64,
    /// Repeat-major: `fold_accuracies[r * folds + f]`.
    pub fold_accuracies: Vec<f64>,
    pub chosen_lambdas: Vec<f64>,
    pub seed: u64,
    pub settings: ProbeSettings,
}

/// Fold index of every item. Members of each class are shuffled and dealt
/// round-robin, continuing the count across classes, so every fold holds
/// within one item of its share of each class.
pub fn stratified_folds(labels: &[usize], k: usize, rng: &mut Rng) -> Vec<usize> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        for i in members {
            assignment[i] = next % k;
            next += 1;
        }
    }
    assignment
}

/// Per-column mean and standard deviation of the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Constant columns get unit scale.
    pub fn fit(rows: &[&[f64]]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            var.iter_mut().zip(r.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m) * (v - m));
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn transform(&self, rows: &[&[f64]]) -> Tensor {
        let data = rows.iter().flat_map(|r| r.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s)).collect();
        Tensor::from_vec(rows.len(), self.mean.len(), data).expect("sized")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

fn softmax_rows(z: &mut Tensor) {
    for i in 0..z.rows() {
        let row = z.row_mut(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
}

impl LogisticModel {
    pub fn logits(&self, x: &Tensor) -> Tensor {
        let mut z = x.matmul(&self.weights).expect("width checked at fit");
        for i in 0..z.rows() {
            z.row_mut(i).iter_mut().zip(&self.bias).for_each(|(v, b)| *v += b);
        }
        z
    }

    /// Arg-max class per row, lowest index on ties.
    pub fn predict(&self, x: &Tensor) -> Vec<usize> {
        let z = self.logits(x);
        (0..z.rows())
            .map(|i| z.row(i).iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (c, &v)| if v > best.1 { (c, v) } else { best }).0)
            .collect()
    }
}

/// Full-batch gradient descent on the mean cross-entropy plus
/// `λ/2·‖W‖²`, from zero weights.
pub fn fit_logistic(x: &Tensor, y: &[usize], classes: usize, lambda: f64, iterations: usize, lr: f64) -> LogisticModel {
    let (n, d) = (x.rows(), x.cols());
    let mut model = LogisticModel { weights: Tensor::zeros(d, classes), bias: vec![0.0; classes] };
    let inv_n = 1.0 / n.max(1) as f64;
    for _ in 0..iterations {
        let mut p = model.logits(x);
        softmax_rows(&mut p);
        for (i, &c) in y.iter().enumerate() {
            *p.row_mut(i).get_mut(c).expect("label < classes") -= 1.0;
        }
        let gw = x.t_matmul(&p).expect("shapes agree");
        for (w, g) in model.weights.data_mut().iter_mut().zip(gw.data()) {
            *w -= lr * (g * inv_n + lambda * *w);
        }
        for c in 0..classes {
            let gb: f64 = (0..n).map(|i| p.get(i, c)).sum();
            model.bias[c] -= lr * gb * inv_n;
        }
    }
    model
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

/// Standardizes on `train`, fits, and scores on `test`.
fn train_and_score(
    rows: &[Vec<f64>],
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    classes: usize,
    lambda: f64,
    s: &ProbeSettings,
) -> f64 {
    let pick = |idx: &[usize]| idx.iter().map(|&i| rows[i].as_slice()).collect::<Vec<_>>();
    let (tr, te) = (pick(train), pick(test));
    let scaler = Standardizer::fit(&tr);
    let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let yte: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let model = fit_logistic(&scaler.transform(&tr), &ytr, classes, lambda, s.iterations, s.lr);
    accuracy(&model.predict(&scaler.transform(&te)), &yte)
}

/// Splits `items` (parallel to `assignment`) into (rest, held-out fold).
fn split(assignment: &[usize], fold: usize, items: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut rest = Vec::new();
    let mut held = Vec::new();
    for (&i, &f) in items.iter().zip(assignment) {
        if f == fold {
            held.push(i);
        } else {
            rest.push(i);
        }
    }
    (rest, held)
}

/// Repeated stratified k-fold accuracy of a logistic-regression probe,
/// with λ picked per outer fold by inner cross-validation on its training
/// part.
pub fn linear_probe_cv(emb: &EmbeddingMatrix, settings: &ProbeSettings, seed: u64) -> Result<CVReport> {
    let labels = emb.labels.as_ref().ok_or_else(|| Error::InvalidArgument("linear probe needs graph labels".into()))?;
    let n = labels.len();
    if settings.folds < 2 || settings.inner_folds < 2 || settings.repeats == 0 || settings.lambdas.is_empty() {
        return Err(Error::InvalidArgument("probe needs folds >= 2, inner_folds >= 2, repeats >= 1 and a lambda".into()));
    }
    if n < settings.folds {
        return Err(Error::InvalidArgument(format!("{n} graphs cannot fill {} folds", settings.folds)));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    for c in 0..classes {
        let count = labels.iter().filter(|&&l| l == c).count();
        if count == 1 {
            return Err(Error::InvalidArgument(format!("class {c} has a single member; need at least 2")));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..settings.repeats).flat_map(|r| (0..settings.folds).map(move |f| (r, f))).collect();
    let assignments: Vec<Vec<usize>> =
        (0..settings.repeats).map(|r| stratified_folds(labels, settings.folds, &mut stream(seed, Role::CvSplit, r as u64, 0))).collect();
    let all: Vec<usize> = (0..n).collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(r, f)| {
            let (train, test) = split(&assignments[r], f, &all);
            let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let inner = stratified_folds(&train_labels, settings.inner_folds, &mut stream(seed, Role::CvSplit, r as u64, 1 + f as u64));
            let mut best = (f64::NEG_INFINITY, settings.lambdas[0]);
            for &lambda in &settings.lambdas {
                let score: f64 = (0..settings.inner_folds)
                    .map(|k| {
                        let (itr, iva) = split(&inner, k, &train);
                        if itr.is_empty() || iva.is_empty() {
                            return 0.0;
                        }
                        train_and_score(&emb.rows, labels, &itr, &iva, classes, lambda, settings)
                    })
                    .sum::<f64>()
                    / settings.inner_folds as f64;
                if score > best.0 {
                    best = (score, lambda);
                }
            }
            (train_and_score(&emb.rows, labels, &train, &test, classes, best.1, settings), best.1)
        })
        .collect();

    let fold_accuracies: Vec<f64> = results.iter().map(|r| r.0).collect();
    let count = fold_accuracies.len() as f64;
    let mean = fold_accuracies.iter().sum::<f64>() / count;
    let var = fold_accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / count;
    Ok(CVReport {
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        chosen_lambdas: results.iter().map(|r| r.1).collect(),
        fold_accuracies,
        seed,
        settings: settings.clone(),
    })
}
