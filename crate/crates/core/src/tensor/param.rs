use std::collections::{BTreeMap, BTreeSet};
use std::hash::{DefaultHasher, Hasher};

use super::{Tape, Tensor};
use crate::error::{Error, Result};

/// Adam hyperparameters. Defaults are the GAN settings used throughout the
/// crate: `lr = 2e-4`, `β₁ = 0.5`, `β₂ = 0.999`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 2e-4, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0) {
            return Err(Error::Config(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Named parameters of one model plus the state of its Adam optimizer.
///
/// Names iterate in sorted order so serialization and updates are
/// deterministic. Entries not marked trainable (batch-norm running
/// statistics, frozen weights) are never bound for gradients nor updated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    tensors: BTreeMap<String, Tensor>,
    frozen: BTreeSet<String>,
    moments: BTreeMap<String, Moments>,
    step: u64,
}

const ADAM_M: &str = "adam.m.";
const ADAM_V: &str = "adam.v.";
const ADAM_STEP: &str = "adam.step";

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) {
        let name = name.into();
        if trainable {
            self.frozen.remove(&name);
        } else {
            self.frozen.insert(name.clone());
        }
        self.tensors.insert(name, tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn require_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.tensors.get_mut(name).ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        self.tensors.contains_key(name) && !self.frozen.contains(name)
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<()> {
        self.require(name)?;
        if trainable {
            self.frozen.remove(name);
        } else {
            self.frozen.insert(name.to_string());
        }
        Ok(())
    }

    /// Freezes every entry: nothing is bound for gradients afterwards.
    pub fn freeze_all(&mut self) {
        self.frozen = self.tensors.keys().cloned().collect();
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn trainable_names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().filter(|k| !self.frozen.contains(*k)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn zero_grads(&mut self) {
        self.tensors.values_mut().for_each(Tensor::zero_grad);
    }

    /// Adds the gradients of every parameter bound on `tape` into this set.
    pub fn accumulate_grads(&mut self, tape: &Tape) -> Result<()> {
        for (name, var) in tape.bound_params() {
            if let Some(g) = tape.grad(var) {
                if let Some(t) = self.tensors.get_mut(name) {
                    t.accumulate_grad(g)?;
                }
            }
        }
        Ok(())
    }

    /// One bias-corrected Adam update of every trainable parameter.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        let names: Vec<String> = self.trainable_names().map(str::to_string).collect();
        if let Some(missing) = names.iter().find(|n| self.tensors[*n].grad().is_none()) {
            return Err(Error::MissingGrad(missing.clone()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for name in names {
            let tensor = self.tensors.get_mut(&name).expect("name from trainable set");
            let n = tensor.numel();
            let mom = self.moments.entry(name).or_insert_with(|| Moments { m: vec![0.0; n], v: vec![0.0; n] });
            let grad = tensor.grad().expect("checked above").to_vec();
            for (i, value) in tensor.data_mut().iter_mut().enumerate() {
                let g = grad[i];
                mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
                mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = mom.m[i] / bc1;
                let v_hat = mom.v[i] / bc2;
                *value -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }

    /// Order-sensitive hash of every name, shape and value bit pattern.
    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (name, t) in &self.tensors {
            h.write(name.as_bytes());
            for &d in t.shape() {
                h.write_usize(d);
            }
            for v in t.data() {
                h.write_u64(v.to_bits());
            }
        }
        h.finish()
    }

    /// Flattens parameters (and optionally optimizer state) into named
    /// tensors, each name prefixed with `prefix`.
    pub fn export(&self, prefix: &str, with_optimizer: bool) -> Vec<(String, Tensor)> {
        let mut out: Vec<(String, Tensor)> = self
            .tensors
            .iter()
            .map(|(k, t)| (format!("{prefix}{k}"), Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("finite")))
            .collect();
        if with_optimizer {
            out.push((format!("{prefix}{ADAM_STEP}"), Tensor::scalar(self.step as f64)));
            for (k, mom) in &self.moments {
                let shape = self.tensors[k].shape().to_vec();
                out.push((format!("{prefix}{ADAM_M}{k}"), Tensor::new(shape.clone(), mom.m.clone()).expect("finite")));
                out.push((format!("{prefix}{ADAM_V}{k}"), Tensor::new(shape, mom.v.clone()).expect("finite")));
            }
        }
        out
    }

    /// Rebuilds a set from entries starting with `prefix`. Names ending in
    /// `running_mean` / `running_var` come back as non-trainable buffers.
    pub fn import<'a>(entries: impl IntoIterator<Item = (&'a str, &'a Tensor)>, prefix: &str) -> Result<Self> {
        let mut set = ParamSet::new();
        let mut moments: BTreeMap<String, Moments> = BTreeMap::new();
        for (name, t) in entries {
            let Some(local) = name.strip_prefix(prefix) else { continue };
            if local == ADAM_STEP {
                set.step = t.data().first().copied().unwrap_or(0.0) as u64;
            } else if let Some(p) = local.strip_prefix(ADAM_M) {
                moments.entry(p.to_string()).or_default().m = t.data().to_vec();
            } else if let Some(p) = local.strip_prefix(ADAM_V) {
                moments.entry(p.to_string()).or_default().v = t.data().to_vec();
            } else {
                let buffer = local.ends_with("running_mean") || local.ends_with("running_var");
                set.insert(local, t.clone(), !buffer);
            }
        }
        for (k, mom) in &moments {
            let n =
                set.require(k).map_err(|_| Error::Checkpoint(format!("optimizer state for unknown `{k}`")))?.numel();
            if mom.m.len() != n || mom.v.len() != n {
                return Err(Error::Checkpoint(format!("optimizer state for `{k}` has wrong size")));
            }
        }
        set.moments = moments;
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64, grad: f64) -> ParamSet {
        let mut p = ParamSet::new();
        let mut t = Tensor::from_vec(vec![value]).unwrap();
        t.accumulate_grad(&[grad]).unwrap();
        p.insert("w", t, true);
        p
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = single(1.5, 0.0);
        p.adam_step(&AdamConfig::default()).unwrap();
        assert_eq!(p.get("w").unwrap().data(), &[1.5]);
        assert_eq!(p.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig::default();
        for g in [3.0, -0.01, 250.0] {
            let mut p = single(0.0, g);
            p.adam_step(&cfg).unwrap();
            let moved = p.get("w").unwrap().data()[0];
            assert!((moved.abs() - cfg.lr).abs() < 1e-9, "g={g} moved {moved}");
            assert_eq!(moved.signum(), -g.signum());
        }
    }

    #[test]
    fn missing_grad_names_parameter() {
        let mut p = single(0.0, 1.0);
        p.insert("bias", Tensor::zeros(vec![2]), true);
        match p.adam_step(&AdamConfig::default()) {
            Err(Error::MissingGrad(name)) => assert_eq!(name, "bias"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frozen_entries_are_skipped() {
        let mut p = single(0.0, 1.0);
        p.insert("bn.running_mean", Tensor::zeros(vec![2]), false);
        p.adam_step(&AdamConfig::default()).unwrap();
        assert_eq!(p.get("bn.running_mean").unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn export_import_preserves_state() {
        let mut p = single(0.3, 0.7);
        p.insert("bn.running_var", Tensor::full(vec![2], 1.0), false);
        p.adam_step(&AdamConfig::default()).unwrap();
        let entries = p.export("g.", true);
        let q = ParamSet::import(entries.iter().map(|(n, t)| (n.as_str(), t)), "g.").unwrap();
        assert_eq!(q.step(), 1);
        assert_eq!(q.checksum(), p.checksum());
        assert!(!q.is_trainable("bn.running_var"));
        assert_eq!(q.moments, p.moments);
    }
}
