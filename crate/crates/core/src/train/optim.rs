use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamStore;
use crate::tensor::Tensor;

/// Adam with decoupled weight decay. Moments are created lazily for the
/// parameters that receive gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Steps taken so far.
    pub t: u64,
    #[serde(skip)]
    pub m: ParamStore,
    #[serde(skip)]
    pub v: ParamStore,
}

impl AdamW {
    pub fn new(beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self { beta1, beta2, eps, weight_decay, t: 0, m: ParamStore::default(), v: ParamStore::default() }
    }

    /// One update of every parameter named in `grads`:
    /// `p ← p·(1 − lr·λ) − lr·m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut ParamStore, grads: &BTreeMap<String, Tensor>, lr: f64) -> Result<()> {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let decay = 1.0 - lr * self.weight_decay;
        for (name, g) in grads {
            let p = params.get_mut(name).ok_or_else(|| Error::Missing(format!("gradient for unknown parameter {name}")))?;
            if p.shape() != g.shape() {
                return Err(Error::Shape(format!("{name}: gradient {:?} vs parameter {:?}", g.shape(), p.shape())));
            }
            if self.m.get(name).is_none() {
                self.m.insert(name, Tensor::zeros(g.shape()));
                self.v.insert(name, Tensor::zeros(g.shape()));
            }
            let m = self.m.get_mut(name).expect("moment exists");
            let v = self.v.get_mut(name).expect("moment exists");
            let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
            for (((pi, &gi), mi), vi) in
                p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut()).zip(v.data_mut().iter_mut())
            {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi = *pi * decay - lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Scale every gradient so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut BTreeMap<String, Tensor>, max_norm: f64) -> f64 {
    let norm = grads.values().flat_map(|g| g.data()).map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.values_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    /// Relative improvement needed to reset the patience counter.
    pub threshold: f64,
    pub floor: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self { factor: 0.5, patience: 5, threshold: 1e-4, floor: 1e-8 }
    }
}

/// Reduce-on-plateau for a score where higher is better.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub config: PlateauConfig,
    pub lr: f64,
    pub best: Option<f64>,
    pub bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(config: PlateauConfig, lr: f64) -> Self {
        Self { config, lr, best: None, bad_epochs: 0 }
    }

    /// Record one epoch's score and return the learning rate to use next.
    /// After `patience` consecutive epochs without an improvement of more
    /// than `threshold·|best|`, the rate is multiplied by `factor`.
    pub fn step(&mut self, score: f64) -> f64 {
        let improved = match self.best {
            None => true,
            Some(b) => score > b + self.config.threshold * b.abs(),
        };
        if improved {
            self.best = Some(score);
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.config.patience {
                self.lr = (self.lr * self.config.factor).max(self.config.floor.min(self.lr));
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}

/// Learning rate after replaying `history` through a fresh scheduler.
pub fn plateau_schedule(history: &[f64], lr: f64, config: PlateauConfig) -> f64 {
    let mut s = PlateauScheduler::new(config, lr);
    for &h in history {
        s.step(h);
    }
    s.lr
}
