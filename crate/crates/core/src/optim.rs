//! AdamW with a linear warmup / linear decay learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::nn::Parameters;

/// Training hyperparameters. Defaults are the fine-tuning settings used for
/// the large pretrained encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Fraction of total steps spent warming up.
    pub warmup_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Fixed optimizer step budget, cycling through the data as needed.
    /// `None` runs `epochs` full passes. Zero epochs always means no steps.
    pub steps: Option<usize>,
    /// Keep encoder parameters fixed; only heads are updated.
    pub freeze_encoder: bool,
    /// Hidden width of the MLP heads; `None` uses the encoder dimension.
    pub head_hidden: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            warmup_rate: 0.06,
            weight_decay: 0.01,
            epochs: 6,
            batch_size: 16,
            seed: 0,
            steps: None,
            freeze_encoder: false,
            head_hidden: None,
        }
    }
}

impl TrainConfig {
    /// Total optimizer steps for `examples` training items.
    pub fn total_steps(&self, examples: usize) -> usize {
        let per_epoch = examples.div_ceil(self.batch_size.max(1));
        let full = per_epoch * self.epochs;
        match self.steps {
            Some(budget) if self.epochs > 0 => budget,
            _ => full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSchedule {
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LinearSchedule {
    pub fn new(peak_lr: f64, warmup_rate: f64, total_steps: usize) -> Self {
        LinearSchedule {
            peak_lr,
            warmup_steps: (warmup_rate * total_steps as f64).round() as usize,
            total_steps,
        }
    }

    /// Learning rate for 0-based step `t`.
    pub fn lr(&self, t: usize) -> f64 {
        if t < self.warmup_steps {
            return self.peak_lr * (t + 1) as f64 / self.warmup_steps as f64;
        }
        let decay = self.total_steps.saturating_sub(self.warmup_steps);
        if decay == 0 {
            return self.peak_lr;
        }
        let remaining = self.total_steps.saturating_sub(t) as f64;
        self.peak_lr * (remaining / decay as f64).max(0.0)
    }
}

/// Adam with decoupled weight decay. Decay is skipped for 1-D tensors
/// (biases).
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P, lr: f64) {
        self.step_masked(params, grads, lr, None)
    }

    /// Like [`AdamW::step`], but tensors whose `trainable` flag is false are
    /// left untouched (no moment update, no decay).
    pub fn step_masked<P: Parameters>(
        &mut self,
        params: &mut P,
        grads: &P,
        lr: f64,
        trainable: Option<&[bool]>,
    ) {
        let grads: Vec<&[f64]> = grads
            .tensors()
            .into_iter()
            .map(|(_, t)| t.data.as_slice())
            .collect();
        let mut tensors = params.tensors_mut();
        if self.m.is_empty() {
            self.m = tensors.iter().map(|t| vec![0.0; t.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (k, tensor) in tensors.iter_mut().enumerate() {
            if trainable.is_some_and(|mask| !mask[k]) {
                continue;
            }
            let decay = if tensor.shape.len() > 1 {
                self.weight_decay
            } else {
                0.0
            };
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, p) in tensor.data.iter_mut().enumerate() {
                let g = grads[k][i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let update = (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
                *p -= lr * (update + decay * *p);
            }
        }
    }
}
