//! Mini-batch training loop shared by all models.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::nn::{zeros_like, Parameters};
use crate::optim::{AdamW, LinearSchedule, TrainConfig};

/// Mean batch loss after each optimizer step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub losses: Vec<f64>,
}

impl LossCurve {
    pub fn last(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// Per-example losses; a plain scalar for single-task models.
pub trait StepLoss: Send + Copy + Default {
    fn total(&self) -> f64;
    fn add(&mut self, other: &Self);
    fn scale(&mut self, k: f64);
}

impl StepLoss for f64 {
    fn total(&self) -> f64 {
        *self
    }
    fn add(&mut self, other: &Self) {
        *self += other;
    }
    fn scale(&mut self, k: f64) {
        *self *= k;
    }
}

/// Runs `cfg.total_steps` AdamW steps. `grad` returns an example's loss and
/// accumulates its gradient into the buffer it is handed. Per-example work is
/// data-parallel; gradients are summed in batch order so results do not
/// depend on the thread count.
pub(crate) fn run<P, E, L, G>(
    params: &mut P,
    examples: &[E],
    cfg: &TrainConfig,
    trainable: &[bool],
    grad: G,
) -> Vec<L>
where
    P: Parameters + Clone + Send + Sync,
    E: Sync,
    L: StepLoss,
    G: Fn(&P, &E, &mut P) -> L + Sync + Send,
{
    let total = cfg.total_steps(examples.len());
    if examples.is_empty() || total == 0 {
        return Vec::new();
    }
    let schedule = LinearSchedule::new(cfg.learning_rate, cfg.warmup_rate, total);
    let mut opt = AdamW::new(cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_7a11);
    let batch = cfg.batch_size.clamp(1, examples.len());
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut cursor = order.len();
    let mut curve = Vec::with_capacity(total);

    for step in 0..total {
        let mut idx = Vec::with_capacity(batch);
        while idx.len() < batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let take = (batch - idx.len()).min(order.len() - cursor);
            idx.extend_from_slice(&order[cursor..cursor + take]);
            cursor += take;
        }

        let snapshot = &*params;
        let parts = exec::map(&idx, |&i| {
            let mut g = zeros_like(snapshot);
            let loss = grad(snapshot, &examples[i], &mut g);
            (loss, g)
        });
        let mut parts = parts.into_iter();
        let (mut loss, mut g) = parts.next().expect("non-empty batch");
        for (l, gi) in parts {
            loss.add(&l);
            g.add_(&gi);
        }
        let k = 1.0 / idx.len() as f64;
        loss.scale(k);
        g.scale_(k);
        opt.step_masked(params, &g, schedule.lr(step), Some(trainable));
        curve.push(loss);
    }
    curve
}

/// Trainable-flag mask: false for tensors whose name starts with a frozen
/// prefix.
pub(crate) fn mask<P: Parameters>(params: &P, frozen_prefix: Option<&str>) -> Vec<bool> {
    params
        .tensors()
        .iter()
        .map(|(name, _)| frozen_prefix.is_none_or(|p| !name.starts_with(p)))
        .collect()
}
