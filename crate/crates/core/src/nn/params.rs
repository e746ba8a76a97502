use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{BatchStats, Gradients, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub value: Tensor,
    pub trainable: bool,
    grad: Option<Tensor>,
    first_moment: Tensor,
    second_moment: Tensor,
    step: u64,
}

impl ParamEntry {
    fn new(value: Tensor, trainable: bool) -> Self {
        let (r, c) = (value.rows(), value.cols());
        ParamEntry { value, trainable, grad: None, first_moment: Tensor::zeros(r, c), second_moment: Tensor::zeros(r, c), step: 0 }
    }

    pub fn grad(&self) -> Option<&Tensor> {
        self.grad.as_ref()
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Named tensors with gradient slots and Adam state.
///
/// Non-trainable entries ("buffers") hold batch-norm running statistics;
/// they are checkpointed but never updated by the optimizer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, ParamEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.insert(name.into(), ParamEntry::new(value, true));
    }

    pub fn insert_buffer(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.insert(name.into(), ParamEntry::new(value, false));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries.get(name).map(|e| &e.value).ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn entry(&self, name: &str) -> Result<&ParamEntry> {
        self.entries.get(name).ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    /// Replaces a tensor's value; the shape must match.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let e = self.entries.get_mut(name).ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        if !e.value.same_shape(&value) {
            return Err(Error::shape("ParamStore::set", format!("{:?}", e.value.shape()), format!("{:?}", value.shape())));
        }
        e.value = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Binds a stored tensor onto a tape as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape, name: &str) -> Result<Var> {
        tape.param(name, self.get(name)?)
    }

    /// Adds the tape's parameter gradients into the gradient slots.
    pub fn accumulate(&mut self, grads: &Gradients, tape: &Tape) -> Result<()> {
        for (name, g) in grads.params(tape) {
            let e = self.entries.get_mut(name).ok_or_else(|| Error::MissingTensor(name.to_string()))?;
            if !e.trainable {
                continue;
            }
            match &mut e.grad {
                Some(acc) => acc.add_assign(&g)?,
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for e in self.entries.values_mut() {
            e.grad = None;
        }
    }

    /// L2 norm of the accumulated gradients of every tensor under `prefix`.
    pub fn grad_norm(&self, prefix: &str) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .filter_map(|(_, e)| e.grad.as_ref())
            .map(Tensor::sum_squares)
            .sum::<f64>()
            .sqrt()
    }

    /// Bias-corrected Adam update of every trainable tensor, then clears
    /// the gradients. Weight decay is added to the gradient (L2 form).
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        for (name, e) in &self.entries {
            if e.trainable && e.grad.is_none() {
                return Err(Error::MissingGradient(name.clone()));
            }
        }
        for e in self.entries.values_mut().filter(|e| e.trainable) {
            let g = e.grad.take().expect("checked above");
            e.step += 1;
            let t = e.step as i32;
            let c1 = 1.0 - cfg.beta1.powi(t);
            let c2 = 1.0 - cfg.beta2.powi(t);
            let p = e.value.data_mut();
            let m = e.first_moment.data_mut();
            let v = e.second_moment.data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i] + cfg.weight_decay * p[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            if !e.value.is_finite() {
                return Err(Error::NonFinite("adam_step".into()));
            }
        }
        self.zero_grads();
        Ok(())
    }

    /// Folds observed batch statistics into the running averages stored at
    /// `<prefix>.running_mean` / `<prefix>.running_var`.
    pub fn update_running_stats(&mut self, stats: &[BatchStats], momentum: f64) -> Result<()> {
        for s in stats {
            for (suffix, observed) in [("running_mean", &s.mean), ("running_var", &s.var)] {
                let name = format!("{}.{suffix}", s.prefix);
                let e = self.entries.get_mut(&name).ok_or_else(|| Error::MissingTensor(name.clone()))?;
                for (r, o) in e.value.data_mut().iter_mut().zip(observed.iter()) {
                    *r = (1.0 - momentum) * *r + momentum * o;
                }
            }
        }
        Ok(())
    }

    /// Rounds every value through binary32 so the store survives a
    /// checkpoint round-trip bit for bit.
    pub fn round_to_f32(&mut self) {
        for e in self.entries.values_mut() {
            e.value = e.value.round_to_f32();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with_grad(g: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::filled(2, 2, 0.5));
        s.entries.get_mut("w").unwrap().grad = Some(Tensor::filled(2, 2, g));
        s
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = store_with_grad(1.0);
        s.adam_step(&AdamConfig::new(0.01, 0.0)).unwrap();
        for &v in s.get("w").unwrap().data() {
            assert!((v - (0.5 - 0.01)).abs() < 1e-6);
        }
        assert!(s.entry("w").unwrap().grad().is_none());
        assert_eq!(s.entry("w").unwrap().step(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = store_with_grad(0.0);
        s.adam_step(&AdamConfig::new(0.01, 0.0)).unwrap();
        assert_eq!(s.get("w").unwrap(), &Tensor::filled(2, 2, 0.5));
    }

    #[test]
    fn deterministic_updates() {
        let mut a = store_with_grad(0.3);
        let mut b = store_with_grad(0.3);
        a.adam_step(&AdamConfig::new(0.1, 0.01)).unwrap();
        b.adam_step(&AdamConfig::new(0.1, 0.01)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::zeros(1, 1));
        assert!(matches!(s.adam_step(&AdamConfig::new(0.1, 0.0)), Err(Error::MissingGradient(_))));
    }

    #[test]
    fn buffers_are_not_optimized() {
        let mut s = store_with_grad(1.0);
        s.insert_buffer("bn.running_mean", Tensor::zeros(1, 2));
        s.adam_step(&AdamConfig::new(0.1, 0.0)).unwrap();
        assert_eq!(s.get("bn.running_mean").unwrap(), &Tensor::zeros(1, 2));
    }
}
