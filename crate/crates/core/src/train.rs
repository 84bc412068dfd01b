//! Mini-batch training: MSE loss on scaled targets, Adam with bias
//! correction, seeded shuffling, early stopping, and plateau LR reduction.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{SampleSequence, SplitDataset};
use crate::net::{
    init_params, network_backward, network_forward, Mode, NetworkGradients, NetworkParams,
    NetworkShape,
};
use crate::rng::{self, tag};

/// Both validation-loss callbacks treat a drop smaller than this as noise.
pub const IMPROVEMENT_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite loss at epoch {epoch}: training diverged")]
    NonFiniteLoss { epoch: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The training schedule. Defaults: lr 0.001 over up to 100 epochs with
/// batches of 64, early stopping patience 10, and LR halving after 5
/// plateau epochs down to a 1e−6 floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub es_patience: usize,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub min_lr: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 64,
            es_patience: 10,
            lr_patience: 5,
            lr_factor: 0.5,
            min_lr: 1e-6,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Field-by-field sanity check; the message names the offending field.
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.es_patience == 0 {
            return bad("es_patience must be at least 1".into());
        }
        if self.lr_patience == 0 {
            return bad("lr_patience must be at least 1".into());
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return bad(format!(
                "lr_factor must lie in (0, 1), got {}",
                self.lr_factor
            ));
        }
        if !(self.min_lr.is_finite() && self.min_lr > 0.0) {
            return bad(format!("min_lr must be positive, got {}", self.min_lr));
        }
        if self.learning_rate <= self.min_lr {
            return bad(format!(
                "learning_rate ({}) must exceed min_lr ({})",
                self.learning_rate, self.min_lr
            ));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return bad(format!(
                "adam_beta1 must lie in [0, 1), got {}",
                self.adam_beta1
            ));
        }
        if !(0.0..1.0).contains(&self.adam_beta2) {
            return bad(format!(
                "adam_beta2 must lie in [0, 1), got {}",
                self.adam_beta2
            ));
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon > 0.0) {
            return bad(format!(
                "adam_epsilon must be positive, got {}",
                self.adam_epsilon
            ));
        }
        Ok(())
    }
}

/// Mean squared error and its gradient: loss = (1/n)Σ(p−t)², ∂loss/∂p_k =
/// 2(p_k−t_k)/n. Panics on empty or mismatched inputs.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    assert!(!predictions.is_empty(), "mse_loss: inputs must be nonempty");
    assert_eq!(
        predictions.len(),
        targets.len(),
        "mse_loss: length mismatch"
    );
    let n = predictions.len() as f64;
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let diff = p - t;
            loss += diff * diff;
            2.0 * diff / n
        })
        .collect();
    (loss / n, grad)
}

/// Adam's moment accumulators, shaped like the parameters they update.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: NetworkGradients,
    pub v: NetworkGradients,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(shape: NetworkShape) -> Self {
        Self {
            m: NetworkGradients::zeros(shape),
            v: NetworkGradients::zeros(shape),
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update:
/// m←β₁m+(1−β₁)g, v←β₂v+(1−β₂)g², θ←θ−lr·m̂/(√v̂+ε).
/// Panics if the gradient shapes do not match the parameters.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &NetworkGradients,
    state: &mut AdamState,
    lr: f64,
    config: &TrainConfig,
) {
    let shapes_match = params
        .tensors()
        .iter()
        .zip(grads.tensors())
        .all(|(p, g)| p.len() == g.len());
    assert!(
        shapes_match,
        "adam_step: gradient shapes must match parameters"
    );
    state.step_count += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let bc1 = 1.0 - b1.powi(state.step_count as i32);
    let bc2 = 1.0 - b2.powi(state.step_count as i32);

    let theta = params.tensors_mut();
    let g = grads.tensors();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for (((theta_t, g_t), m_t), v_t) in theta.into_iter().zip(g).zip(m).zip(v) {
        for (((th, &gv), mv), vv) in theta_t
            .iter_mut()
            .zip(g_t)
            .zip(m_t.iter_mut())
            .zip(vv_iter(v_t))
        {
            *mv = b1 * *mv + (1.0 - b1) * gv;
            *vv = b2 * *vv + (1.0 - b2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *th -= lr * m_hat / (v_hat.sqrt() + config.adam_epsilon);
        }
    }
}

// Zip depth workaround: keeps the nested iterator readable above.
fn vv_iter(v: &mut [f64]) -> std::slice::IterMut<'_, f64> {
    v.iter_mut()
}

/// A seeded permutation of 0…n−1, chunked into ⌈n/batch⌉ batches (the last
/// possibly smaller). Deterministic given (seed, epoch).
pub fn make_batches(
    n_samples: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Vec<Vec<usize>> {
    assert!(n_samples >= 1, "make_batches: need at least one sample");
    assert!(
        batch_size >= 1,
        "make_batches: batch size must be at least 1"
    );
    let mut indices: Vec<usize> = (0..n_samples).collect();
    let mut stream = rng::stream(seed, &[tag::SHUFFLE, epoch as u64]);
    use rand::seq::SliceRandom;
    indices.shuffle(&mut stream);
    indices.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Early-stopping bookkeeping: tracks the best validation loss and keeps a
/// snapshot of the parameters that produced it.
#[derive(Debug, Clone)]
pub struct EarlyStopState {
    pub best_val_loss: f64,
    pub epochs_since_improve: usize,
    pub best_params: NetworkParams,
    pub best_epoch: usize,
}

impl EarlyStopState {
    pub fn new(params: &NetworkParams) -> Self {
        Self {
            best_val_loss: f64::INFINITY,
            epochs_since_improve: 0,
            best_params: params.clone(),
            best_epoch: 0,
        }
    }

    /// Feeds one epoch's validation loss; returns true when `patience`
    /// consecutive non-improving epochs have accumulated. Improvement means
    /// dropping below the best by more than [`IMPROVEMENT_EPS`].
    pub fn update(
        &mut self,
        val_loss: f64,
        params: &NetworkParams,
        epoch: usize,
        patience: usize,
    ) -> bool {
        if val_loss < self.best_val_loss - IMPROVEMENT_EPS {
            self.best_val_loss = val_loss;
            self.epochs_since_improve = 0;
            self.best_params = params.clone();
            self.best_epoch = epoch;
            false
        } else {
            self.epochs_since_improve += 1;
            self.epochs_since_improve >= patience
        }
    }
}

/// Plateau learning-rate reduction with the same improvement rule as early
/// stopping.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedulerState {
    pub current_lr: f64,
    pub best_val_loss: f64,
    pub epochs_since_improve: usize,
}

impl LrSchedulerState {
    pub fn new(initial_lr: f64) -> Self {
        Self {
            current_lr: initial_lr,
            best_val_loss: f64::INFINITY,
            epochs_since_improve: 0,
        }
    }

    /// Feeds one epoch's validation loss. After `patience` consecutive
    /// non-improving epochs the rate is multiplied by `factor` (never below
    /// `min_lr`) and the counter resets. Returns true when the rate actually
    /// decreased.
    pub fn update(&mut self, val_loss: f64, patience: usize, factor: f64, min_lr: f64) -> bool {
        if val_loss < self.best_val_loss - IMPROVEMENT_EPS {
            self.best_val_loss = val_loss;
            self.epochs_since_improve = 0;
            return false;
        }
        self.epochs_since_improve += 1;
        if self.epochs_since_improve >= patience {
            self.epochs_since_improve = 0;
            let reduced = (self.current_lr * factor).max(min_lr);
            if reduced < self.current_lr {
                self.current_lr = reduced;
                return true;
            }
        }
        false
    }
}

/// Noteworthy events in an epoch record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainEvent {
    LrReduced,
    EarlyStopped,
}

impl TrainEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LrReduced => "lr_reduced",
            Self::EarlyStopped => "early_stopped",
        }
    }
}

/// One epoch's line in the log. `lr` is the rate in effect during the
/// epoch's updates (scheduler cuts apply from the next epoch).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lr: f64,
    pub events: Vec<TrainEvent>,
}

/// Full training history plus where it stopped and which epoch won.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

impl TrainLog {
    /// CSV export: `epoch,train_mse,val_mse,lr,event`, events joined by ';'.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        let io_err = |source| TrainError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "epoch,train_mse,val_mse,lr,event")?;
            for r in &self.records {
                let events: Vec<&str> = r.events.iter().map(|e| e.as_str()).collect();
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    r.epoch,
                    r.train_mse,
                    r.val_mse,
                    r.lr,
                    events.join(";")
                )?;
            }
            w.flush()
        };
        emit().map_err(io_err)
    }
}

/// Eval-mode predictions (scaled units) for a set of sequences.
pub fn predict(params: &NetworkParams, sequences: &[SampleSequence]) -> Vec<f64> {
    sequences
        .iter()
        .map(|seq| network_forward(params, &seq.inputs, Mode::Eval).0)
        .collect()
}

fn all_finite(params: &NetworkParams) -> bool {
    params
        .tensors()
        .iter()
        .all(|t| t.iter().all(|v| v.is_finite()))
}

/// Trains on the scaled split: up to `config.epochs` epochs of shuffled
/// mini-batches (one Adam step each), validation MSE in eval mode after
/// every epoch, scheduler update then early-stop update on that same loss.
/// Returns the best-validation parameter snapshot and the full log.
/// Deterministic given (data, config): reruns produce identical results.
pub fn train_model(
    split: &SplitDataset,
    config: &TrainConfig,
) -> Result<(NetworkParams, TrainLog), TrainError> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if split.validation.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }

    let input_size = split.train[0].inputs[0].len();
    let shape = NetworkShape {
        input_size,
        ..NetworkShape::default()
    };
    let mut params = init_params(config.seed, shape);
    let mut adam = AdamState::new(shape);
    let mut early_stop = EarlyStopState::new(&params);
    let mut scheduler = LrSchedulerState::new(config.learning_rate);

    let n_train = split.train.len();
    let val_targets: Vec<f64> = split.validation.iter().map(|s| s.target).collect();

    let mut records = Vec::new();
    let mut stopped_epoch = 0;
    for epoch in 0..config.epochs {
        stopped_epoch = epoch;
        let lr_in_effect = scheduler.current_lr;
        let mut epoch_sse = 0.0;

        for batch in make_batches(n_train, config.batch_size, config.seed, epoch) {
            // Forward every sequence in training mode, each with its own
            // dropout stream keyed by (seed, epoch, sample index) so results
            // do not depend on batch iteration order.
            let mut predictions = Vec::with_capacity(batch.len());
            let mut caches = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for &idx in &batch {
                let seq = &split.train[idx];
                let mut dropout_rng =
                    rng::stream(config.seed, &[tag::DROPOUT, epoch as u64, idx as u64]);
                let (pred, cache) = network_forward(
                    &params,
                    &seq.inputs,
                    Mode::Train {
                        dropout_rng: &mut dropout_rng,
                    },
                );
                predictions.push(pred);
                caches.push(cache);
                targets.push(seq.target);
            }
            let (batch_loss, d_predictions) = mse_loss(&predictions, &targets);
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch });
            }
            epoch_sse += batch_loss * batch.len() as f64;

            let mut grads = NetworkGradients::zeros(shape);
            for (cache, d_pred) in caches.iter().zip(&d_predictions) {
                grads.add_assign(&network_backward(&params, cache, *d_pred));
            }
            adam_step(&mut params, &grads, &mut adam, lr_in_effect, config);
            if !all_finite(&params) {
                return Err(TrainError::NonFiniteLoss { epoch });
            }
        }

        let train_mse = epoch_sse / n_train as f64;
        let (val_mse, _) = mse_loss(&predict(&params, &split.validation), &val_targets);
        if !val_mse.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }

        // Both callbacks read the same validation loss; the scheduler moves
        // first so a reduction and a stop can land on the same epoch.
        let mut events = Vec::new();
        if scheduler.update(val_mse, config.lr_patience, config.lr_factor, config.min_lr) {
            events.push(TrainEvent::LrReduced);
        }
        let should_stop = early_stop.update(val_mse, &params, epoch, config.es_patience);
        if should_stop {
            events.push(TrainEvent::EarlyStopped);
        }
        records.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            lr: lr_in_effect,
            events,
        });
        if should_stop {
            break;
        }
    }

    let log = TrainLog {
        records,
        stopped_epoch,
        best_epoch: early_stop.best_epoch,
    };
    Ok((early_stop.best_params, log))
}
