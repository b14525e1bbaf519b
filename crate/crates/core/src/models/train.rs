use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Task};
use crate::error::{Error, Result};
use crate::tensornet::{gradient_check_fn, Adam, CheckReport, Graph, ParamStore, Scalar, Tensor, TrainConfig};

use super::model::{prediction_from_logits, Batch, EncodedSet, Model};

/// Per-class loss multipliers indexed by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub Vec<f64>);

impl ClassWeights {
    /// Balanced heuristic `N / (K · N_c)`; absent classes take the largest
    /// present weight.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Size("class weights of an empty set".into()));
        }
        let mut counts = vec![0usize; k];
        for &y in labels {
            *counts
                .get_mut(y)
                .ok_or_else(|| Error::Size(format!("label {y} outside {k} classes")))? += 1;
        }
        let n = labels.len() as f64;
        let mut w: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { n / (k as f64 * c as f64) })
            .collect();
        let max = w.iter().copied().fold(0.0, f64::max);
        for (wi, &c) in w.iter_mut().zip(&counts) {
            if c == 0 {
                *wi = max;
            }
        }
        Ok(ClassWeights(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn compute_class_weights(train: &Dataset, task: Task) -> Result<ClassWeights> {
    ClassWeights::from_labels(&train.labels(task), task.num_classes())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

/// Patience bookkeeping over a monitored score (higher is better; only a
/// strict increase counts as improvement).
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
        }
    }

    /// Records `score` for `epoch`; returns true when it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            true
        } else {
            false
        }
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        epoch - self.best_epoch >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Trains with validation accuracy on `val` as the monitored score.
pub fn train<S: Scalar>(
    model: &mut Model<S>,
    train_set: &EncodedSet<'_>,
    val_set: &EncodedSet<'_>,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    if val_set.is_empty() {
        return Err(Error::Size("empty validation set".into()));
    }
    train_with_monitor(model, train_set, cfg, |m, _| m.accuracy(val_set))
}

/// Mini-batch Adam with early stopping on the score returned by `monitor`
/// after every epoch. The model ends up holding the best epoch's weights.
pub fn train_with_monitor<S, F>(
    model: &mut Model<S>,
    train_set: &EncodedSet<'_>,
    cfg: &TrainConfig,
    mut monitor: F,
) -> Result<TrainHistory>
where
    S: Scalar,
    F: FnMut(&Model<S>, usize) -> Result<f64>,
{
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Size("empty training set".into()));
    }
    if train_set.task() != model.spec.task {
        return Err(Error::Config("training data encoded for another task".into()));
    }
    let weights = if model.spec.use_class_weights {
        Some(ClassWeights::from_labels(train_set.labels(), model.spec.task.num_classes())?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.params.values();
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train_set.batch::<S>(chunk);
            let grads = {
                let mut g = Graph::new(&model.params);
                let logits = model.logits(&mut g, &batch, cfg.dropout_rate, true, &mut rng)?;
                hits += count_hits(model.spec.task, g.value(logits), &batch);
                let loss = model.loss_node(&mut g, logits, &batch.labels, weights.as_ref().map(ClassWeights::as_slice))?;
                loss_sum += g.value(loss).data()[0].as_f64() * chunk.len() as f64;
                g.backward(loss)?
            };
            model.params.set_grads(&grads);
            adam.step(&mut model.params);
        }
        let val_accuracy = monitor(model, epoch)?;
        let n = train_set.len() as f64;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: hits as f64 / n,
            val_accuracy,
        });
        log::debug!(
            "epoch {epoch}: loss {:.4} train acc {:.4} val acc {val_accuracy:.4}",
            loss_sum / n,
            hits as f64 / n
        );
        if stopper.observe(epoch, val_accuracy) {
            best = model.params.values();
        }
        stopped = epoch;
        if stopper.should_stop(epoch) {
            break;
        }
    }
    model.params.restore_values(&best);
    model.params.zero_grads();
    Ok(TrainHistory {
        epochs,
        best_epoch: stopper.best_epoch(),
        stopped_epoch: stopped,
    })
}

fn count_hits<S: Scalar>(task: Task, logits: &Tensor<S>, batch: &Batch<S>) -> usize {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks_exact(k)
        .zip(&batch.labels)
        .filter(|(row, &y)| {
            let row: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
            prediction_from_logits(task, &row).label == y
        })
        .count()
}

/// Central-difference check of the model loss on `batch` (dropout off, no
/// class weights). `sample` limits the check to a seeded subset of
/// coordinates.
pub fn gradient_check(
    model: &mut Model<f64>,
    batch: &Batch<f64>,
    step: f64,
    sample: Option<(usize, u64)>,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let eval = |m: &Model<f64>, store: &ParamStore<f64>, rng: &mut ChaCha8Rng| -> Result<(f64, u64)> {
        let mut g = Graph::new(store);
        let z = m.logits(&mut g, batch, 0.0, false, rng)?;
        let loss = m.loss_node(&mut g, z, &batch.labels, None)?;
        Ok((g.value(loss).data()[0], g.kink_signature()))
    };
    let analytic = {
        let mut g = Graph::new(&model.params);
        let z = model.logits(&mut g, batch, 0.0, false, &mut rng)?;
        let loss = model.loss_node(&mut g, z, &batch.labels, None)?;
        g.backward(loss)?
    };
    let shape = model.clone_without_params();
    let mut params = std::mem::take(&mut model.params);
    let result = gradient_check_fn(&mut params, &analytic, step, sample, |store| {
        eval(&shape, store, &mut rng)
    });
    model.params = params;
    result
}

impl<S: Scalar> Model<S> {
    /// Same architecture with an empty parameter store; used where the
    /// parameters are borrowed separately.
    pub(crate) fn clone_without_params(&self) -> Model<S> {
        Model {
            spec: self.spec.clone(),
            params: ParamStore::new(),
            layout: self.layout.clone(),
            vocab: None,
            input_dim: self.input_dim,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_weight_examples() {
        let balanced: Vec<usize> = (0..100).map(|i| i % 2).collect();
        assert_eq!(ClassWeights::from_labels(&balanced, 2).unwrap().0, vec![1.0, 1.0]);
        let skewed: Vec<usize> = (0..100).map(|i| usize::from(i >= 90)).collect();
        let w = ClassWeights::from_labels(&skewed, 2).unwrap().0;
        assert!((w[0] - 100.0 / 180.0).abs() < 1e-12);
        assert!((w[0] - 0.556).abs() < 1e-3);
        assert_eq!(w[1], 5.0);
        let single = vec![1usize; 7];
        assert_eq!(ClassWeights::from_labels(&single, 2).unwrap().0, vec![0.5, 0.5]);
        assert!(ClassWeights::from_labels(&[], 2).is_err());
    }

    #[test]
    fn stopper_walk() {
        let mut s = EarlyStopping::new(15);
        let curve = |e: usize| if e == 3 { 0.9 } else { 0.5 + 0.01 * e.min(3) as f64 };
        let mut stop = 0;
        for e in 1..=50 {
            s.observe(e, curve(e));
            if s.should_stop(e) {
                stop = e;
                break;
            }
        }
        assert_eq!((s.best_epoch(), stop), (3, 18));
    }

    #[test]
    fn equal_score_is_not_improvement() {
        let mut s = EarlyStopping::new(2);
        assert!(s.observe(1, 0.5));
        assert!(!s.observe(2, 0.5));
        assert!(s.observe(3, 0.6));
        assert_eq!(s.best_epoch(), 3);
    }
}
