//! Shared training loop and evaluation for every [`SequenceModel`].

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{Adam, BatchOutput, SequenceBatch, SequenceModel, LOG_FLOOR};
use crate::data::SequenceDataset;
use crate::error::{ensure, EnnError, Result};
use crate::linalg::Matrix;
use crate::monitor::{self, TraceSnapshot};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Epochs without a validation-loss improvement before stopping.
    pub early_stop_patience: usize,
    pub lr_reduce_factor: f64,
    pub lr_reduce_patience: usize,
    pub seed: u64,
    /// When false, `wall_time_s` is written as 0 so metric files compare byte for byte.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 128,
            epochs: 10,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            early_stop_patience: 5,
            lr_reduce_factor: 0.5,
            lr_reduce_patience: 3,
            seed: 42,
            record_wall_time: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate must be positive, got {}", self.learning_rate);
        ensure!(self.batch_size >= 1, "batch_size must be at least 1");
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            ensure!(b > 0.0 && b < 1.0, "{name} must lie in (0, 1), got {b}");
        }
        ensure!(self.adam_eps > 0.0, "adam_eps must be positive");
        ensure!(
            self.lr_reduce_factor > 0.0 && self.lr_reduce_factor <= 1.0,
            "lr_reduce_factor must lie in (0, 1], got {}",
            self.lr_reduce_factor
        );
        ensure!(self.early_stop_patience >= 1 && self.lr_reduce_patience >= 1, "patience values must be at least 1");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub metrics: Vec<EpochMetrics>,
    /// Epoch 0 is the trace before training; models without a trace have none.
    pub snapshots: Vec<TraceSnapshot>,
    /// Epoch whose weights were kept, 0 if no epoch ran.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub final_learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

fn check_data<M: SequenceModel>(model: &M, data: &SequenceDataset) -> Result<()> {
    ensure!(
        data.dim == model.input_dim(),
        "{} has {} features, model expects {}",
        data.name,
        data.dim,
        model.input_dim()
    );
    ensure!(
        data.classes == model.num_classes(),
        "{} has {} classes, model has {}",
        data.name,
        data.classes,
        model.num_classes()
    );
    Ok(())
}

/// Summed `-ln(p_y + 1e-12)` and number of correct argmax predictions.
fn score(out: &BatchOutput, labels: &[usize]) -> (f64, usize) {
    let mut loss = 0.0;
    for (i, &c) in labels.iter().enumerate() {
        loss -= (out.probs.get(i, c) + LOG_FLOOR).ln();
    }
    let correct = out.predictions().iter().zip(labels).filter(|(p, y)| p == y).count();
    (loss, correct)
}

/// One optimizer step on a batch. Returns the batch's mean loss and its
/// train-mode outputs, both from before the update.
pub fn train_step<M: SequenceModel>(
    model: &mut M,
    opt: &mut Adam,
    memory: &mut Option<Matrix>,
    batch: &SequenceBatch,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, BatchOutput)> {
    let (out, grads) = model.train_batch(memory, batch, rng)?;
    let (loss, _) = score(&out, batch.labels());
    let loss = loss / batch.len() as f64;
    if !loss.is_finite() {
        return Err(EnnError::contract(format!("training diverged: batch loss {loss}")));
    }
    opt.step(model.params_mut(), &grads, lr);
    Ok((loss, out))
}

fn snapshot_of(epoch: usize, memory: &Option<Matrix>) -> Result<Option<TraceSnapshot>> {
    memory.as_ref().map(|m| monitor::snapshot(epoch, m)).transpose()
}

/// Mini-batch Adam with seeded shuffling, early stopping on validation loss
/// (best weights restored) and learning-rate reduction on plateau.
///
/// When the model does not reset per batch, its trace carries across batches
/// and epochs. Each epoch's snapshot is the trace after its last batch.
pub fn train<M: SequenceModel>(
    model: &mut M,
    cfg: &TrainConfig,
    train_set: &SequenceDataset,
    val_set: &SequenceDataset,
) -> Result<TrainReport> {
    cfg.validate()?;
    ensure!(!train_set.is_empty(), "training set {} is empty", train_set.name);
    ensure!(!val_set.is_empty(), "validation set {} is empty", val_set.name);
    check_data(model, train_set)?;
    check_data(model, val_set)?;

    let mut shuffle_rng = substream(cfg.seed, Stream::Shuffle);
    let mut noise_rng = substream(cfg.seed, Stream::Noise);
    let mut opt = Adam::new(model.params(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut lr = cfg.learning_rate;

    let mut memory = model.initial_memory();
    let mut snapshots: Vec<TraceSnapshot> = snapshot_of(0, &memory)?.into_iter().collect();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, M::Params)> = None;
    let mut stop_wait = 0;
    let mut plateau_wait = 0;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            if model.resets_per_batch() {
                memory = model.initial_memory();
            }
            let batch = train_set.batch(idx)?;
            let (loss, out) = train_step(model, &mut opt, &mut memory, &batch, lr, &mut noise_rng)?;
            loss_sum += loss * idx.len() as f64;
            correct += score(&out, batch.labels()).1;
        }
        snapshots.extend(snapshot_of(epoch, &memory)?);

        let val = evaluate(model, val_set, cfg.batch_size)?;
        let n = train_set.len() as f64;
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss: val.loss,
            val_acc: val.accuracy,
            wall_time_s: if cfg.record_wall_time { started.elapsed().as_secs_f64() } else { 0.0 },
        });

        if best.as_ref().is_none_or(|(b, _, _)| val.loss < *b) {
            best = Some((val.loss, epoch, model.params().clone()));
            stop_wait = 0;
            plateau_wait = 0;
        } else {
            stop_wait += 1;
            plateau_wait += 1;
            if stop_wait >= cfg.early_stop_patience {
                stopped_early = true;
                break;
            }
            if plateau_wait >= cfg.lr_reduce_patience {
                lr *= cfg.lr_reduce_factor;
                plateau_wait = 0;
            }
        }
    }

    let best_epoch = match best {
        Some((_, epoch, params)) => {
            *model.params_mut() = params;
            epoch
        }
        None => 0,
    };
    Ok(TrainReport { metrics, snapshots, best_epoch, stopped_early, final_learning_rate: lr })
}

/// Eval-mode accuracy, mean cross-entropy and confusion counts. The trace
/// starts fresh and follows the model's reset policy.
pub fn evaluate<M: SequenceModel>(model: &M, data: &SequenceDataset, batch_size: usize) -> Result<Evaluation> {
    ensure!(batch_size >= 1, "batch_size must be at least 1");
    ensure!(!data.is_empty(), "evaluation set {} is empty", data.name);
    check_data(model, data)?;
    let c = model.num_classes();
    let mut confusion = vec![vec![0usize; c]; c];
    let (mut loss_sum, mut correct) = (0.0, 0usize);
    let mut memory = model.initial_memory();
    let order: Vec<usize> = (0..data.len()).collect();
    for idx in order.chunks(batch_size) {
        if model.resets_per_batch() {
            memory = model.initial_memory();
        }
        let batch = data.batch(idx)?;
        let out = model.eval_batch(&mut memory, &batch)?;
        let (l, k) = score(&out, batch.labels());
        loss_sum += l;
        correct += k;
        for (p, &y) in out.predictions().into_iter().zip(batch.labels()) {
            confusion[y][p] += 1;
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation { accuracy: correct as f64 / n, loss: loss_sum / n, confusion })
}
