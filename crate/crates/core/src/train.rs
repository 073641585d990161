//! Shared training loop: Adam with warmup + polynomial decay, per-epoch
//! dev-F0.5 checkpoint selection, early stopping, and a frozen probe batch
//! whose loss is re-measured every epoch.
//!
//! Tasks plug in through [`TrainTask`]: they build one example's loss
//! graph and score the model on their dev set. The loop itself never
//! touches task semantics, which keeps plain fine-tuning and distillation
//! runs step-for-step comparable (identical shuffles, identical dropout
//! streams).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GradStore, Mode, ModelParams, NodeId, RngState, Tape};
use crate::seed;

/// Optimization settings (Adam, linear warmup, polynomial decay to zero).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub seed: u64,
    pub patience: usize,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl TrainConfig {
    pub fn validate(&self, num_examples: usize) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch_size, max_epochs, and patience must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if num_examples == 0 {
            return Err(Error::Config("training set is empty".into()));
        }
        let total = self.total_steps(num_examples);
        if self.warmup_steps >= total {
            return Err(Error::Config(format!(
                "warmup_steps {} must be below total steps {total}",
                self.warmup_steps
            )));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, num_examples: usize) -> usize {
        num_examples.div_ceil(self.batch_size)
    }

    pub fn total_steps(&self, num_examples: usize) -> usize {
        self.max_epochs * self.steps_per_epoch(num_examples)
    }

    /// Linear warmup to `learning_rate`, then polynomial (power 1) decay
    /// to zero at the final step.
    pub fn lr_at(&self, step: usize, total_steps: usize) -> f64 {
        if step < self.warmup_steps {
            return self.learning_rate * (step + 1) as f64 / self.warmup_steps.max(1) as f64;
        }
        let remaining = (total_steps - self.warmup_steps) as f64;
        let progress = (step - self.warmup_steps) as f64 / remaining;
        self.learning_rate * (1.0 - progress).max(0.0)
    }
}

/// Scalar decomposition of one objective evaluation.
///
/// Invariants: `kd = alpha*kd_forward + (1-alpha)*kd_reverse` and
/// `total = gec + beta*kd` whenever distillation is active; plain
/// fine-tuning leaves every kd component at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LossBreakdown {
    pub gec: f64,
    pub kd_forward: f64,
    pub kd_reverse: f64,
    pub kd: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn plain(gec: f64) -> Self {
        LossBreakdown { gec, total: gec, ..Default::default() }
    }

    fn add(&mut self, other: &LossBreakdown) {
        self.gec += other.gec;
        self.kd_forward += other.kd_forward;
        self.kd_reverse += other.kd_reverse;
        self.kd += other.kd;
        self.total += other.total;
    }

    fn scaled(&self, factor: f64) -> LossBreakdown {
        LossBreakdown {
            gec: self.gec * factor,
            kd_forward: self.kd_forward * factor,
            kd_reverse: self.kd_reverse * factor,
            kd: self.kd * factor,
            total: self.total * factor,
        }
    }
}

/// Dev-set scores used for checkpoint selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DevMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
}

/// Per-epoch metrics row (serialized as one JSONL line per epoch).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_p: f64,
    pub dev_r: f64,
    pub dev_f05: f64,
    pub kd_forward: f64,
    pub kd_reverse: f64,
    pub kd: f64,
    pub probe: LossBreakdown,
}

/// Result of a training run: the dev-best checkpoint and its history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub best_epoch: usize,
    pub best_dev: DevMetrics,
    pub epochs: Vec<EpochRecord>,
    /// Batch-mean loss decomposition at every optimizer step.
    pub steps: Vec<LossBreakdown>,
    /// Probe-batch losses before any update (step 0).
    pub probe_start: LossBreakdown,
    pub final_rng: RngState,
}

/// One trainable objective over an indexed example set.
pub trait TrainTask {
    fn num_examples(&self) -> usize;

    /// Builds the loss graph for example `index`; the returned node must
    /// be a 1x1 scalar on the tape.
    fn example_loss(
        &self,
        model: &ModelParams,
        index: usize,
        mode: &mut Mode,
    ) -> Result<(Tape, NodeId, LossBreakdown)>;

    /// Greedy-decode scores on the task's dev set.
    fn dev_metrics(&self, model: &ModelParams) -> Result<DevMetrics>;
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, config: &TrainConfig) {
        self.t += 1;
        let b1 = config.adam_beta1;
        let b2 = config.adam_beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + config.adam_eps);
        }
    }
}

/// Mean inference-mode loss decomposition over a fixed index set.
fn probe_loss<T: TrainTask>(
    task: &T,
    model: &ModelParams,
    indices: &[usize],
) -> Result<LossBreakdown> {
    let mut total = LossBreakdown::default();
    for &i in indices {
        let (_, _, bd) = task.example_loss(model, i, &mut Mode::Inference)?;
        total.add(&bd);
    }
    Ok(total.scaled(1.0 / indices.len().max(1) as f64))
}

/// Runs the full training loop and returns the dev-best checkpoint.
pub fn train<T: TrainTask>(
    task: &T,
    mut model: ModelParams,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let n = task.num_examples();
    config.validate(n)?;
    let total_steps = config.total_steps(n);

    let mut grads = GradStore::zeros(model.store.param_count());
    let mut adam = Adam::new(model.store.param_count());

    // The probe batch is the first batch of the first epoch's order.
    let first_order = shuffled(n, config.seed, 0);
    let probe: Vec<usize> = first_order.iter().copied().take(config.batch_size).collect();
    let probe_start = probe_loss(task, &model, &probe)?;

    let mut best: Option<(usize, DevMetrics, ModelParams)> = None;
    let mut epochs = Vec::new();
    let mut steps = Vec::new();
    let mut step = 0usize;
    let mut example_counter = 0u64;

    for epoch in 0..config.max_epochs {
        let order = shuffled(n, config.seed, epoch as u64);
        let mut epoch_loss = 0.0;
        let mut epoch_bd = LossBreakdown::default();
        for batch in order.chunks(config.batch_size) {
            grads.reset();
            let mut batch_bd = LossBreakdown::default();
            for &index in batch {
                let mut rng = seed::rng(config.seed, "dropout", example_counter);
                example_counter += 1;
                let (tape, loss, bd) =
                    task.example_loss(&model, index, &mut Mode::Train { rng: &mut rng })?;
                if !bd.total.is_finite() {
                    return Err(Error::Divergence {
                        step,
                        detail: format!("non-finite loss on example {index}"),
                    });
                }
                tape.backward(loss, &model.store, &mut grads);
                batch_bd.add(&bd);
            }
            let batch_mean = batch_bd.scaled(1.0 / batch.len() as f64);
            grads.scale(1.0 / batch.len() as f64);
            let lr = config.lr_at(step, total_steps);
            adam.step(model.store.data_mut(), grads.data(), lr, config);
            if !model.store.all_finite() {
                return Err(Error::Divergence {
                    step,
                    detail: "parameters became non-finite after optimizer step".into(),
                });
            }
            epoch_loss += batch_mean.total;
            epoch_bd.add(&batch_mean);
            steps.push(batch_mean);
            step += 1;
        }

        let batches = config.steps_per_epoch(n) as f64;
        let dev = task.dev_metrics(&model)?;
        let probe_now = probe_loss(task, &model, &probe)?;
        epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: epoch_loss / batches,
            dev_p: dev.precision,
            dev_r: dev.recall,
            dev_f05: dev.f05,
            kd_forward: epoch_bd.kd_forward / batches,
            kd_reverse: epoch_bd.kd_reverse / batches,
            kd: epoch_bd.kd / batches,
            probe: probe_now,
        });

        let improved = best.as_ref().map_or(true, |(_, b, _)| dev.f05 > b.f05);
        if improved {
            best = Some((epoch + 1, dev, model.clone()));
        }
        let best_epoch = best.as_ref().map(|(e, _, _)| *e).unwrap_or(0);
        if (epoch + 1) - best_epoch >= config.patience {
            break;
        }
    }

    let (best_epoch, best_dev, best_model) =
        best.ok_or_else(|| Error::Contract("training ran zero epochs".into()))?;
    Ok(TrainOutcome {
        model: best_model,
        best_epoch,
        best_dev,
        epochs,
        steps,
        probe_start,
        final_rng: RngState { seed: config.seed, step },
    })
}

/// Seeded Fisher-Yates permutation of `0..n` for one epoch.
fn shuffled(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    use rand::Rng;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed, "shuffle", epoch);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}
